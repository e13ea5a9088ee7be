#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace evavla {

enum class VariationKind { Rotation3, Illumination, PatchPlacement };

/// Number of physical parameters carried by a variation kind (3, 4 or 2).
int kind_dimension(VariationKind kind) noexcept;

/// Wire / config name: "rotation3", "illumination", "patch".
std::string_view kind_name(VariationKind kind) noexcept;
VariationKind parse_kind(std::string_view name);

/// A bounded box of physical parameters for one variation kind.
///
/// The optimizer never sees physical units. Every free dimension is mapped
/// affinely onto [-1, 1]; frozen dimensions are pinned to a physical value and
/// dropped from the search vector entirely.
struct VariationSpace {
  VariationKind kind = VariationKind::Rotation3;
  std::vector<std::string> dim_names;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::optional<double>> frozen;

  /// Number of dimensions the optimizer searches over.
  int search_dim() const;
  std::vector<int> free_indices() const;

  /// Throws InvalidBounds / InvalidParameter if the invariants do not hold.
  void validate() const;
};

struct PhysicalParams {
  VariationKind kind = VariationKind::Rotation3;
  std::vector<double> values;
};

std::vector<std::string> default_dim_names(VariationKind kind);

/// Builds a validated space from explicit bounds (config route).
VariationSpace make_space(VariationKind kind, std::vector<double> lower,
                          std::vector<double> upper,
                          std::vector<std::optional<double>> frozen = {});

/// Rotation about the vertical axis only: alpha = beta = 0, gamma free.
VariationSpace make_rotation_space(double gamma_min_deg, double gamma_max_deg);

/// Light centre (x, y) free; spread and intensity frozen.
VariationSpace make_illumination_space(double x_min, double x_max, double y_min,
                                       double y_max, double sigma_fixed,
                                       double intensity_fixed);

/// Central third of a texture: x in [W/3, 2W/3], y in [H/3, 2H/3].
VariationSpace make_patch_space(int texture_w, int texture_h);

Eigen::VectorXd encode(const VariationSpace& space, const PhysicalParams& p);

/// Clips to [-1, 1] before the affine map, so the result is always in bounds.
PhysicalParams decode(const VariationSpace& space, const Eigen::VectorXd& v);

/// Like encode() but tolerates out-of-range values (no clipping, no error).
Eigen::VectorXd normalize_unchecked(const VariationSpace& space,
                                    const std::vector<double>& values);

}  // namespace evavla
