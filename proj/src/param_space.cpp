#include "evavla/param_space.hpp"

#include <algorithm>
#include <cmath>

#include "evavla/error.hpp"

namespace evavla {

int kind_dimension(VariationKind kind) noexcept {
  switch (kind) {
    case VariationKind::Rotation3: return 3;
    case VariationKind::Illumination: return 4;
    case VariationKind::PatchPlacement: return 2;
  }
  return 0;
}

std::string_view kind_name(VariationKind kind) noexcept {
  switch (kind) {
    case VariationKind::Rotation3: return "rotation3";
    case VariationKind::Illumination: return "illumination";
    case VariationKind::PatchPlacement: return "patch";
  }
  return "?";
}

VariationKind parse_kind(std::string_view name) {
  if (name == "rotation3") return VariationKind::Rotation3;
  if (name == "illumination") return VariationKind::Illumination;
  if (name == "patch") return VariationKind::PatchPlacement;
  throw Error(ErrorCode::InvalidParameter,
              "unknown variation kind '" + std::string(name) + "'");
}

std::vector<std::string> default_dim_names(VariationKind kind) {
  switch (kind) {
    case VariationKind::Rotation3: return {"alpha", "beta", "gamma"};
    case VariationKind::Illumination: return {"x", "y", "sigma", "intensity"};
    case VariationKind::PatchPlacement: return {"x", "y"};
  }
  return {};
}

int VariationSpace::search_dim() const {
  return static_cast<int>(std::count_if(frozen.begin(), frozen.end(),
                                        [](const auto& f) { return !f; }));
}

std::vector<int> VariationSpace::free_indices() const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(frozen.size()); ++i)
    if (!frozen[i]) out.push_back(i);
  return out;
}

void VariationSpace::validate() const {
  const auto n = static_cast<std::size_t>(kind_dimension(kind));
  if (lower.size() != n || upper.size() != n || frozen.size() != n ||
      dim_names.size() != n)
    throw Error(ErrorCode::Dimension,
                std::string(kind_name(kind)) + " space needs " +
                    std::to_string(n) + " dimensions");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]))
      throw Error(ErrorCode::InvalidBounds,
                  "non-finite bound on '" + dim_names[i] + "'");
    if (frozen[i]) {
      if (!(lower[i] <= *frozen[i] && *frozen[i] <= upper[i]))
        throw Error(ErrorCode::InvalidBounds,
                    "frozen value of '" + dim_names[i] + "' outside bounds");
    } else if (!(lower[i] < upper[i])) {
      throw Error(ErrorCode::InvalidBounds,
                  "empty interval on '" + dim_names[i] + "'");
    }
  }
  if (search_dim() == 0)
    throw Error(ErrorCode::InvalidBounds, "space has no free dimension");
}

VariationSpace make_space(VariationKind kind, std::vector<double> lower,
                          std::vector<double> upper,
                          std::vector<std::optional<double>> frozen) {
  if (frozen.empty()) frozen.assign(lower.size(), std::nullopt);
  VariationSpace s{kind, default_dim_names(kind), std::move(lower),
                   std::move(upper), std::move(frozen)};
  s.validate();
  return s;
}

VariationSpace make_rotation_space(double gamma_min_deg, double gamma_max_deg) {
  if (!(gamma_min_deg < gamma_max_deg) || gamma_min_deg < -180.0 ||
      gamma_max_deg > 180.0)
    throw Error(ErrorCode::InvalidBounds,
                "z-axis angle range must satisfy -180 <= min < max <= 180");
  return make_space(VariationKind::Rotation3, {0.0, 0.0, gamma_min_deg},
                    {0.0, 0.0, gamma_max_deg}, {0.0, 0.0, std::nullopt});
}

VariationSpace make_illumination_space(double x_min, double x_max, double y_min,
                                       double y_max, double sigma_fixed,
                                       double intensity_fixed) {
  if (!(sigma_fixed > 0.0))
    throw Error(ErrorCode::InvalidParameter, "light spread must be positive");
  if (!(intensity_fixed >= 0.0 && intensity_fixed <= 1.0))
    throw Error(ErrorCode::InvalidParameter,
                "light intensity must lie in [0, 1]");
  if (!(x_min < x_max) || !(y_min < y_max))
    throw Error(ErrorCode::InvalidBounds, "light position range is empty");
  return make_space(VariationKind::Illumination,
                    {x_min, y_min, sigma_fixed, intensity_fixed},
                    {x_max, y_max, sigma_fixed, intensity_fixed},
                    {std::nullopt, std::nullopt, sigma_fixed, intensity_fixed});
}

VariationSpace make_patch_space(int texture_w, int texture_h) {
  if (texture_w < 3 || texture_h < 3)
    throw Error(ErrorCode::InvalidBounds,
                "texture must be at least 3x3 pixels, got " +
                    std::to_string(texture_w) + "x" +
                    std::to_string(texture_h));
  const double w = texture_w;
  const double h = texture_h;
  return make_space(VariationKind::PatchPlacement, {w / 3.0, h / 3.0},
                    {2.0 * w / 3.0, 2.0 * h / 3.0});
}

Eigen::VectorXd normalize_unchecked(const VariationSpace& space,
                                    const std::vector<double>& values) {
  const auto idx = space.free_indices();
  Eigen::VectorXd v(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const int i = idx[j];
    v[static_cast<Eigen::Index>(j)] =
        2.0 * (values[i] - space.lower[i]) / (space.upper[i] - space.lower[i]) -
        1.0;
  }
  return v;
}

Eigen::VectorXd encode(const VariationSpace& space, const PhysicalParams& p) {
  if (p.kind != space.kind)
    throw Error(ErrorCode::KindMismatch,
                std::string(kind_name(p.kind)) + " params given to " +
                    std::string(kind_name(space.kind)) + " space");
  if (p.values.size() != space.lower.size())
    throw Error(ErrorCode::Dimension, "physical parameter count mismatch");
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    if (!(space.lower[i] <= p.values[i] && p.values[i] <= space.upper[i]))
      throw Error(ErrorCode::OutOfBounds,
                  "'" + space.dim_names[i] + "' = " +
                      std::to_string(p.values[i]) + " outside [" +
                      std::to_string(space.lower[i]) + ", " +
                      std::to_string(space.upper[i]) + "]");
  }
  return normalize_unchecked(space, p.values);
}

PhysicalParams decode(const VariationSpace& space, const Eigen::VectorXd& v) {
  const auto idx = space.free_indices();
  if (v.size() != static_cast<Eigen::Index>(idx.size()))
    throw Error(ErrorCode::Dimension,
                "expected " + std::to_string(idx.size()) +
                    " normalized components, got " + std::to_string(v.size()));
  PhysicalParams p{space.kind, std::vector<double>(space.lower.size())};
  for (std::size_t i = 0; i < space.frozen.size(); ++i)
    if (space.frozen[i]) p.values[i] = *space.frozen[i];
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const int i = idx[j];
    const double lo = space.lower[i];
    const double hi = space.upper[i];
    // NaN clips to the lower bound rather than leaking into the oracle.
    const double c = std::isnan(v[static_cast<Eigen::Index>(j)])
                         ? -1.0
                         : std::clamp(v[static_cast<Eigen::Index>(j)], -1.0, 1.0);
    double x = lo + 0.5 * (c + 1.0) * (hi - lo);
    if (c <= -1.0) x = lo;
    if (c >= 1.0) x = hi;
    p.values[i] = std::clamp(x, lo, hi);
  }
  return p;
}

}  // namespace evavla
