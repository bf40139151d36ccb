#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "lact/phantom.hpp"
#include "lact/projector.hpp"

using namespace lact;
using Catch::Approx;

namespace {

/// Length of the line x cos t + y sin t = r inside the axis-aligned box
/// [x0, x1] x [y0, y1] (Liang-Barsky clipping).
double clip_length(double t, double r, double x0, double x1, double y0, double y1) {
  const double c = std::cos(t), s = std::sin(t);
  // Point on the line and its direction.
  const double px = r * c, py = r * s, dx = -s, dy = c;
  double lo = -1e300, hi = 1e300;
  auto slab = [&](double p, double d, double a, double b) {
    if (std::abs(d) < 1e-15) return p >= a && p <= b;
    double u0 = (a - p) / d, u1 = (b - p) / d;
    if (u0 > u1) std::swap(u0, u1);
    lo = std::max(lo, u0);
    hi = std::min(hi, u1);
    return true;
  };
  if (!slab(px, dx, x0, x1) || !slab(py, dy, y0, y1)) return 0.0;
  return std::max(0.0, hi - lo);
}

SliceImage random_image(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  SliceImage img(n, n);
  for (auto& v : img.values()) v = nd(rng);
  return img;
}

}  // namespace

TEST_CASE("clip oracle sanity", "[projector]") {
  CHECK(clip_length(0.0, 0.0, -0.5, 0.5, -0.5, 0.5) == Approx(1.0));
  CHECK(clip_length(std::numbers::pi / 4, 0.0, -0.5, 0.5, -0.5, 0.5) == Approx(std::sqrt(2.0)));
  CHECK(clip_length(0.0, 0.7, -0.5, 0.5, -0.5, 0.5) == 0.0);
}

TEST_CASE("1x1 image: central rays equal the clipped length at every angle", "[projector]") {
  const auto g = make_geometry(180, 0.0, 1.0, 3, 0.25);
  const auto s = forward_project(SliceImage(1, 1, 1.0), g);
  for (std::size_t v = 0; v < g.n_views; ++v)
    CHECK(std::abs(s.at(v, 1) - clip_length(g.angle_rad(v), 0.0, -0.5, 0.5, -0.5, 0.5)) < 1e-6);
}

TEST_CASE("single bright pixel: center rays at 0/45/90/135 degrees are exact", "[projector]") {
  const std::size_t n = 16;
  SliceImage img(n, n);
  const std::size_t ix = 5, iy = 9;
  img.at(ix, iy) = 1.0;
  const double x = img.x_of(ix), y = img.y_of(iy);
  for (double deg : {0.0, 45.0, 90.0, 135.0}) {
    const double t = deg * std::numbers::pi / 180.0;
    const double r = x * std::cos(t) + y * std::sin(t);
    ParallelGeometry g = make_geometry(1, deg, 1.0, 25, 1.0);
    g.detector_center = 12.0 - r;  // bin 12 passes through the pixel center
    const auto s = forward_project(img, g);
    CHECK(std::abs(s.at(0, 12) - clip_length(t, r, x - 0.5, x + 0.5, y - 0.5, y + 0.5)) < 1e-6);
  }
}

TEST_CASE("axis-aligned views integrate columns exactly", "[projector]") {
  const auto img = random_image(8, 1);
  const auto g = make_geometry(91, 0.0, 1.0, 12, 1.0);
  ParallelGeometry gg = g;
  gg.detector_center = 5.5;  // bins at r = -5.5 .. 5.5, columns at -3.5 .. 3.5
  const auto s = forward_project(img, gg);
  for (std::size_t ix = 0; ix < 8; ++ix) {
    double col = 0.0, row = 0.0;
    for (std::size_t iy = 0; iy < 8; ++iy) {
      col += img.at(ix, iy);
      row += img.at(iy, ix);
    }
    CHECK(s.at(0, ix + 2) == Approx(col).margin(1e-12));
    CHECK(s.at(90, ix + 2) == Approx(row).margin(1e-12));
  }
}

TEST_CASE("back projection is the exact adjoint", "[projector]") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  for (std::size_t trial = 0; trial < 5; ++trial) {
    const auto g = make_geometry(37 + trial, 3.0 * trial, 2.5, 97, 0.9);
    const auto x = random_image(64, trial);
    Sinogram y(g);
    for (auto& v : y.values()) v = nd(rng);
    const double lhs = dot(forward_project(x, g).values(), y.values());
    const double rhs = dot(x.values(), back_project(y, 64, 64).values());
    CHECK(std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs)) < 1e-12);
  }
}

TEST_CASE("adjoint holds for non-square images", "[projector]") {
  const auto g = make_geometry(30, 0.0, 5.9, 60, 1.0);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  SliceImage x(40, 24);
  for (auto& v : x.values()) v = nd(rng);
  Sinogram y(g);
  for (auto& v : y.values()) v = nd(rng);
  const double lhs = dot(forward_project(x, g).values(), y.values());
  const double rhs = dot(x.values(), back_project(y, 40, 24).values());
  CHECK(lhs == Approx(rhs).epsilon(1e-12));
}

TEST_CASE("projection is linear and zero maps to zero", "[projector]") {
  const auto g = desk_full_geometry();
  const auto a = random_image(64, 3), b = random_image(64, 4);
  SliceImage c(64, 64);
  for (std::size_t i = 0; i < c.size(); ++i) c.storage()[i] = 2.0 * a.storage()[i] - b.storage()[i];
  const auto pa = forward_project(a, g), pb = forward_project(b, g), pc = forward_project(c, g);
  for (std::size_t i = 0; i < pc.size(); ++i)
    CHECK(pc.storage()[i] == Approx(2.0 * pa.storage()[i] - pb.storage()[i]).margin(1e-9));
  const auto zero = forward_project(SliceImage(64, 64), g);
  for (double v : zero.values()) CHECK(v == 0.0);
}

TEST_CASE("view mass is exact on axis views and close elsewhere", "[projector]") {
  // Linear interpolation across unit bins aliases on oblique views, so the
  // zeroth moment is only approximately constant there.
  const auto d = gen_dataset(20, 8, desk_full_geometry(), 64, 64);
  for (const auto& p : d) {
    const auto m = view_mass(p.sinogram);
    const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
    double total = 0.0;
    for (double v : p.image.values()) total += v;
    CHECK((*hi - *lo) / *hi < 0.02);
    CHECK(m[0] == Approx(total).epsilon(1e-9));
    CHECK(m[90] == Approx(total).epsilon(1e-9));
  }
}

TEST_CASE("restrict_views keeps rows and re-bases angles", "[projector]") {
  const auto d = gen_dataset(1, 1, desk_full_geometry(), 64, 64);
  const auto half = restrict_views(d[0].sinogram, {0, 89});
  CHECK(half.n_views() == 90);
  CHECK(half.geometry().angle_deg(89) == Approx(89.0));
  for (std::size_t v = 0; v < 90; ++v)
    for (std::size_t b = 0; b < 93; ++b) CHECK(half.at(v, b) == d[0].sinogram.at(v, b));

  const auto mid = restrict_views(d[0].sinogram, {30, 59});
  CHECK(mid.geometry().angle_start_deg == Approx(30.0));
  CHECK(mid.at(0, 40) == d[0].sinogram.at(30, 40));
  CHECK(forward_project(d[0].image, mid.geometry()) == mid);

  CHECK_THROWS_AS(restrict_views(d[0].sinogram, {10, 5}), GeometryError);
  CHECK_THROWS_AS(restrict_views(d[0].sinogram, {0, 180}), GeometryError);
}
