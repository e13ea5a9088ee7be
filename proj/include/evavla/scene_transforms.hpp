#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "evavla/param_space.hpp"

namespace evavla {

/// RGB image, row-major, channel-interleaved, values in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  static constexpr int kChannels = 3;

  Image() = default;
  Image(int w, int h, double fill = 0.0);

  double& at(int x, int y, int c) { return pixels[index(x, y, c)]; }
  double at(int x, int y, int c) const { return pixels[index(x, y, c)]; }
  bool empty() const { return pixels.empty(); }

  void validate() const;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
            static_cast<std::size_t>(x)) * kChannels + static_cast<std::size_t>(c);
  }
};

struct LightSpec {
  double x = 0.0;
  double y = 0.0;
  double sigma = 1.0;
  double intensity = 0.0;
};

enum class IlluminationMode { Additive, Multiplicative };

/// Top-left anchored placement of a patch image in texture pixels.
struct PatchSpec {
  Image patch;
  double x = 0.0;
  double y = 0.0;
};

using Matrix3 = Eigen::Matrix3d;

/// R = Rz(yaw) * Ry(pitch) * Rx(roll), intrinsic Z-Y-X, angles in degrees.
Matrix3 rotation_matrix_zyx(double yaw_deg, double pitch_deg, double roll_deg);

/// Point-light contribution I * exp(-|z - c|^2 / (2 sigma^2)) at point z.
double light_falloff(const LightSpec& light, double zx, double zy);

/// Adds (or multiplies in) the Gaussian light at every pixel centre, clamped to
/// [0, 1]. The light centre may lie outside the image.
Image apply_illumination(const Image& img, const LightSpec& light,
                         IlluminationMode mode = IlluminationMode::Additive);

/// Opaque overwrite of the patch rectangle; the anchor must lie in the central
/// third of the texture and the patch must fit inside it.
Image composite_patch(const Image& texture, const PatchSpec& patch);

struct SceneContext {
  std::optional<Image> patch_asset;
  IlluminationMode illumination_mode = IlluminationMode::Additive;
};

/// Image for illumination / patch variations, a pose delta for rotations.
using VariationOutput = std::variant<Image, Matrix3>;

/// Rotation params are (alpha, beta, gamma) with gamma the vertical-axis
/// angle; the pose delta is rotation_matrix_zyx(gamma, beta, alpha).
VariationOutput apply_variation(const Image& img, const PhysicalParams& params,
                                const SceneContext& ctx);

}  // namespace evavla
