#include "evavla/scene_transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "evavla/error.hpp"

namespace evavla {

namespace {

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace

Image::Image(int w, int h, double fill)
    : width(w), height(h),
      pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * kChannels,
             fill) {}

void Image::validate() const {
  if (width < 0 || height < 0 ||
      pixels.size() != static_cast<std::size_t>(width) *
                           static_cast<std::size_t>(height) * kChannels)
    throw Error(ErrorCode::InvalidParameter, "image buffer does not match its shape");
  for (double v : pixels)
    if (!(v >= 0.0 && v <= 1.0))
      throw Error(ErrorCode::InvalidParameter, "pixel value outside [0, 1]");
}

Matrix3 rotation_matrix_zyx(double yaw_deg, double pitch_deg, double roll_deg) {
  const double a = deg2rad(yaw_deg);
  const double b = deg2rad(pitch_deg);
  const double g = deg2rad(roll_deg);
  const double ca = std::cos(a), sa = std::sin(a);
  const double cb = std::cos(b), sb = std::sin(b);
  const double cg = std::cos(g), sg = std::sin(g);
  Matrix3 r;
  r << ca * cb, ca * sb * sg - sa * cg, ca * sb * cg + sa * sg,
       sa * cb, sa * sb * sg + ca * cg, sa * sb * cg - ca * sg,
       -sb,     cb * sg,                cb * cg;
  return r;
}

double light_falloff(const LightSpec& light, double zx, double zy) {
  const double dx = zx - light.x;
  const double dy = zy - light.y;
  return light.intensity *
         std::exp(-(dx * dx + dy * dy) / (2.0 * light.sigma * light.sigma));
}

Image apply_illumination(const Image& img, const LightSpec& light,
                         IlluminationMode mode) {
  if (!(light.sigma > 0.0))
    throw Error(ErrorCode::InvalidParameter, "light spread must be positive");
  if (!(light.intensity >= 0.0 && light.intensity <= 1.0))
    throw Error(ErrorCode::InvalidParameter, "light intensity must lie in [0, 1]");
  Image out = img;
  if (light.intensity == 0.0) return out;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double l = light_falloff(light, x + 0.5, y + 0.5);
      for (int c = 0; c < Image::kChannels; ++c) {
        const double v = img.at(x, y, c);
        const double lit = mode == IlluminationMode::Additive ? v + l : v * (1.0 + l);
        out.at(x, y, c) = std::clamp(lit, 0.0, 1.0);
      }
    }
  }
  return out;
}

Image composite_patch(const Image& texture, const PatchSpec& spec) {
  const double w = texture.width;
  const double h = texture.height;
  if (!(spec.x >= w / 3.0 && spec.x <= 2.0 * w / 3.0 && spec.y >= h / 3.0 &&
        spec.y <= 2.0 * h / 3.0))
    throw Error(ErrorCode::PlacementBounds,
                "patch anchor (" + std::to_string(spec.x) + ", " +
                    std::to_string(spec.y) + ") outside the central region");
  const int x0 = static_cast<int>(std::lround(spec.x));
  const int y0 = static_cast<int>(std::lround(spec.y));
  if (x0 + spec.patch.width > texture.width || y0 + spec.patch.height > texture.height)
    throw Error(ErrorCode::PlacementBounds, "patch overhangs the texture edge");
  Image out = texture;
  for (int y = 0; y < spec.patch.height; ++y)
    for (int x = 0; x < spec.patch.width; ++x)
      for (int c = 0; c < Image::kChannels; ++c)
        out.at(x0 + x, y0 + y, c) = spec.patch.at(x, y, c);
  return out;
}

VariationOutput apply_variation(const Image& img, const PhysicalParams& params,
                                const SceneContext& ctx) {
  if (params.values.size() != static_cast<std::size_t>(kind_dimension(params.kind)))
    throw Error(ErrorCode::Dimension, "parameter count does not match variation kind");
  const auto& v = params.values;
  switch (params.kind) {
    case VariationKind::Rotation3:
      return rotation_matrix_zyx(v[2], v[1], v[0]);
    case VariationKind::Illumination:
      return apply_illumination(img, LightSpec{v[0], v[1], v[2], v[3]},
                                ctx.illumination_mode);
    case VariationKind::PatchPlacement:
      if (!ctx.patch_asset)
        throw Error(ErrorCode::KindMismatch, "patch variation without a patch asset");
      return composite_patch(img, PatchSpec{*ctx.patch_asset, v[0], v[1]});
  }
  throw Error(ErrorCode::KindMismatch, "unknown variation kind");
}

}  // namespace evavla
