#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "evavla/error.hpp"
#include "evavla/image_io.hpp"
#include "evavla/scene_transforms.hpp"

using namespace evavla;

namespace {

Image noise(int w, int h, std::uint64_t seed) {
  Image img(w, h);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& p : img.pixels) p = u(rng);
  return img;
}

// Independent oracle: elementary rotations from Eigen's angle-axis.
Matrix3 elementary_zyx(double a, double b, double g) {
  const double k = std::numbers::pi / 180.0;
  return (Eigen::AngleAxisd(a * k, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(b * k, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(g * k, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

}  // namespace

TEST_CASE("rotation_matrix_zyx") {
  CHECK(rotation_matrix_zyx(0, 0, 0) == Matrix3::Identity());
  const Eigen::Vector3d y = rotation_matrix_zyx(90, 0, 0) * Eigen::Vector3d::UnitX();
  CHECK((y - Eigen::Vector3d::UnitY()).norm() < 1e-15);
  CHECK((rotation_matrix_zyx(30, 45, 60) - elementary_zyx(30, 45, 60)).cwiseAbs().maxCoeff() < 1e-15);

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ang(-180, 180);
  for (int i = 0; i < 1000; ++i) {
    const double a = ang(rng), b = ang(rng), g = ang(rng);
    const Matrix3 r = rotation_matrix_zyx(a, b, g);
    CHECK((r.transpose() * r - Matrix3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(r.determinant() - 1.0) < 1e-12);
    CHECK((r - elementary_zyx(a, b, g)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("illumination golden values") {
  Image img(80, 1, 0.0);
  const Image lit = apply_illumination(img, {0.5, 0.5, 50.0, 0.8});
  CHECK(lit.at(0, 0, 0) == 0.8);
  // 0.8 * exp(-1/2), 30-digit reference.
  CHECK(std::abs(lit.at(50, 0, 2) - 0.485224527770106738883) < 1e-12);

  Image grey(5, 5, 0.2);
  CHECK(apply_illumination(grey, {2.5, 2.5, 50.0, 0.8}).at(2, 2, 0) == 1.0);

  const Image tex = noise(13, 9, 1);
  CHECK(apply_illumination(tex, {4, 4, 10, 0.0}).pixels == tex.pixels);
  CHECK(apply_illumination(tex, {4, 4, 10, 0.0}, IlluminationMode::Multiplicative).pixels == tex.pixels);

  CHECK_THROWS_AS(apply_illumination(tex, {4, 4, 0.0, 0.5}), Error);
  CHECK_THROWS_AS(apply_illumination(tex, {4, 4, 3.0, 1.5}), Error);
}

TEST_CASE("illumination properties") {
  const Image tex = noise(40, 30, 2);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const LightSpec light{-20 + 80 * u(rng), -20 + 70 * u(rng), 1 + 30 * u(rng), u(rng)};
    for (auto mode : {IlluminationMode::Additive, IlluminationMode::Multiplicative}) {
      const Image out = apply_illumination(tex, light, mode);
      for (std::size_t k = 0; k < out.pixels.size(); ++k) {
        CHECK(out.pixels[k] >= tex.pixels[k]);
        CHECK(out.pixels[k] <= 1.0);
      }
    }
  }
  // Extreme inputs stay in range.
  const Image white(8, 8, 1.0);
  const Image black(8, 8, 0.0);
  for (double v : apply_illumination(white, {4, 4, 2, 1.0}).pixels) CHECK(v == 1.0);
  for (double v : apply_illumination(black, {4, 4, 2, 1.0}).pixels) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("illumination is translation-equivariant away from the border") {
  const Image big = noise(60, 60, 4);
  const int dx = 7, dy = 4;
  Image shifted(60, 60);
  for (int y = 0; y < 60; ++y)
    for (int x = 0; x < 60; ++x)
      for (int c = 0; c < 3; ++c)
        shifted.at(x, y, c) = big.at((x - dx + 60) % 60, (y - dy + 60) % 60, c);
  const LightSpec light{20.0, 25.0, 6.0, 0.7};
  const Image a = apply_illumination(big, light);
  const Image b = apply_illumination(shifted, {light.x + dx, light.y + dy, light.sigma, light.intensity});
  for (int y = dy; y < 60; ++y)
    for (int x = dx; x < 60; ++x)
      for (int c = 0; c < 3; ++c)
        CHECK(b.at(x, y, c) == doctest::Approx(a.at(x - dx, y - dy, c)).epsilon(1e-12));
}

TEST_CASE("composite_patch") {
  const Image tex = noise(300, 300, 5);
  const Image patch(20, 20, 0.25);
  const Image out = composite_patch(tex, {patch, 100, 100});
  for (int y = 0; y < 300; ++y)
    for (int x = 0; x < 300; ++x) {
      const bool inside = x >= 100 && x < 120 && y >= 100 && y < 120;
      for (int c = 0; c < 3; ++c) {
        if (inside)
          CHECK(out.at(x, y, c) == 0.25);
        else
          CHECK(out.at(x, y, c) == tex.at(x, y, c));
      }
    }

  auto code = [&](const PatchSpec& p) {
    try {
      composite_patch(tex, p);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  CHECK(code({patch, 0, 0}) == ErrorCode::PlacementBounds);
  CHECK(code({Image(120, 20, 0.1), 200, 150}) == ErrorCode::PlacementBounds);

  // Overwriting with the texture's own pixels is the identity.
  Image same(30, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 30; ++x)
      for (int c = 0; c < 3; ++c) same.at(x, y, c) = tex.at(140 + x, 160 + y, c);
  CHECK(composite_patch(tex, {same, 140, 160}).pixels == tex.pixels);
}

TEST_CASE("property: composite touches exactly the patch rectangle") {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> dim(30, 200);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 40; ++i) {
    const int w = dim(rng), h = dim(rng);
    Image tex(w, h, 0.0);
    Image patch(1 + static_cast<int>(u(rng) * w / 4), 1 + static_cast<int>(u(rng) * h / 4), 1.0);
    const double ax = w / 3.0 + u(rng) * (w / 3.0 - patch.width);
    const double ay = h / 3.0 + u(rng) * (h / 3.0 - patch.height);
    if (ax < w / 3.0 || ay < h / 3.0) continue;
    const Image out = composite_patch(tex, {patch, ax, ay});
    const int x0 = static_cast<int>(std::lround(ax)), y0 = static_cast<int>(std::lround(ay));
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const bool inside = x >= x0 && x < x0 + patch.width && y >= y0 && y < y0 + patch.height;
        CHECK((out.at(x, y, 0) != tex.at(x, y, 0)) == inside);
      }
  }
}

TEST_CASE("apply_variation dispatch") {
  const Image tex = noise(90, 90, 7);
  SceneContext ctx;
  const auto unlit = apply_variation(tex, {VariationKind::Illumination, {45, 45, 50, 0.0}}, ctx);
  CHECK(std::get<Image>(unlit).pixels == tex.pixels);

  const auto pose = apply_variation(tex, {VariationKind::Rotation3, {0, 0, 0}}, ctx);
  CHECK(std::get<Matrix3>(pose) == Matrix3::Identity());
  // gamma is the vertical-axis angle.
  const auto yaw = std::get<Matrix3>(apply_variation(tex, {VariationKind::Rotation3, {0, 0, 90}}, ctx));
  CHECK((yaw * Eigen::Vector3d::UnitX() - Eigen::Vector3d::UnitY()).norm() < 1e-15);

  CHECK_THROWS_AS(apply_variation(tex, {VariationKind::PatchPlacement, {45, 45}}, ctx), Error);
  ctx.patch_asset = Image(6, 6, 1.0);
  const Image out = std::get<Image>(apply_variation(tex, {VariationKind::PatchPlacement, {45, 45}}, ctx));
  for (int y = 0; y < 90; ++y)
    for (int x = 0; x < 90; ++x) {
      const bool inside = x >= 45 && x < 51 && y >= 45 && y < 51;
      CHECK((out.at(x, y, 1) == 1.0 || out.at(x, y, 1) == tex.at(x, y, 1)));
      if (!inside) CHECK(out.at(x, y, 1) == tex.at(x, y, 1));
    }
  CHECK_THROWS_AS(apply_variation(tex, {VariationKind::PatchPlacement, {45}}, ctx), Error);
}

TEST_CASE("png round trip is exact on 8-bit values") {
  Image img(7, 5);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<double>((i * 37) % 256) / 255.0;
  const auto path = std::filesystem::temp_directory_path() / "evavla_png_roundtrip.png";
  write_png(img, path);
  const Image back = read_png(path);
  CHECK(back.width == 7);
  CHECK(back.height == 5);
  CHECK(back.pixels == img.pixels);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_png(path), Error);
}
