"""Black-box adversarial search over physical scene variations."""

from ._evavla import *  # noqa: F401,F403
from ._evavla import __version__  # noqa: F401
