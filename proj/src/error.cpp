#include "evavla/error.hpp"

namespace evavla {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidBounds: return "invalid-bounds";
    case ErrorCode::InvalidParameter: return "invalid-parameter";
    case ErrorCode::KindMismatch: return "kind-mismatch";
    case ErrorCode::OutOfBounds: return "out-of-bounds";
    case ErrorCode::Dimension: return "dimension";
    case ErrorCode::Evaluation: return "evaluation";
    case ErrorCode::InternalState: return "internal-state";
    case ErrorCode::PlacementBounds: return "placement-bounds";
    case ErrorCode::Precondition: return "precondition";
    case ErrorCode::Transport: return "transport";
    case ErrorCode::Timeout: return "timeout";
    case ErrorCode::MalformedResponse: return "malformed-response";
    case ErrorCode::Handshake: return "handshake";
    case ErrorCode::Budget: return "budget";
    case ErrorCode::Config: return "config";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

}  // namespace evavla
