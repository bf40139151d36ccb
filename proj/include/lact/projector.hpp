#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "lact/error.hpp"
#include "lact/geometry.hpp"
#include "lact/image.hpp"

namespace lact {

namespace detail {

/// Walks one ray with Joseph's method: step along the axis the ray is most
/// aligned with and linearly interpolate across the other axis. Calls
/// visit(pixel_index, weight) for each pixel touched; weights already include
/// the per-step path length.
template <class Visit>
void joseph_ray(std::size_t nx, std::size_t ny, double cos_t, double sin_t, double r,
                Visit&& visit) {
  const double cx = (static_cast<double>(nx) - 1.0) / 2.0;
  const double cy = (static_cast<double>(ny) - 1.0) / 2.0;
  const auto inx = static_cast<long>(nx);
  const auto iny = static_cast<long>(ny);
  if (std::abs(cos_t) >= std::abs(sin_t)) {
    // Ray direction is closer to the y axis; one sample per row.
    const double step = 1.0 / std::abs(cos_t);
    for (long iy = 0; iy < iny; ++iy) {
      const double y = static_cast<double>(iy) - cy;
      const double u = (r - y * sin_t) / cos_t + cx;
      const double fl = std::floor(u);
      const long i0 = static_cast<long>(fl);
      const double w = u - fl;
      const std::size_t row = static_cast<std::size_t>(iy) * nx;
      if (i0 >= 0 && i0 < inx) visit(row + static_cast<std::size_t>(i0), (1.0 - w) * step);
      if (i0 + 1 >= 0 && i0 + 1 < inx) visit(row + static_cast<std::size_t>(i0 + 1), w * step);
    }
  } else {
    const double step = 1.0 / std::abs(sin_t);
    for (long ix = 0; ix < inx; ++ix) {
      const double x = static_cast<double>(ix) - cx;
      const double v = (r - x * cos_t) / sin_t + cy;
      const double fl = std::floor(v);
      const long j0 = static_cast<long>(fl);
      const double w = v - fl;
      if (j0 >= 0 && j0 < iny)
        visit(static_cast<std::size_t>(j0) * nx + static_cast<std::size_t>(ix), (1.0 - w) * step);
      if (j0 + 1 >= 0 && j0 + 1 < iny)
        visit(static_cast<std::size_t>(j0 + 1) * nx + static_cast<std::size_t>(ix), w * step);
    }
  }
}

}  // namespace detail

/// Discrete parallel-beam x-ray transform. Entry (i, j) approximates the line
/// integral of the image along x cos(theta_i) + y sin(theta_i) = r_j.
inline Sinogram forward_project(const SliceImage& image, const ParallelGeometry& geometry) {
  validate(geometry);
  if (image.nx() == 0 || image.ny() == 0) throw ShapeError("forward_project: empty image");
  require_support(geometry, image.nx(), image.ny());
  Sinogram sino(geometry);
  const auto& px = image.storage();
  for (std::size_t v = 0; v < geometry.n_views; ++v) {
    const double t = geometry.angle_rad(v);
    const double c = std::cos(t);
    const double s = std::sin(t);
    auto row = sino.row(v);
    for (std::size_t b = 0; b < geometry.n_bins; ++b) {
      double acc = 0.0;
      detail::joseph_ray(image.nx(), image.ny(), c, s, geometry.bin_position(b),
                         [&](std::size_t idx, double w) { acc += w * px[idx]; });
      row[b] = acc;
    }
  }
  return sino;
}

/// Exact transpose of forward_project: scatters each bin along its ray with
/// the same interpolation weights.
inline SliceImage back_project(const Sinogram& sinogram, std::size_t nx, std::size_t ny) {
  const auto& geometry = sinogram.geometry();
  validate(geometry);
  if (nx == 0 || ny == 0) throw ShapeError("back_project: empty image size");
  if (sinogram.size() != geometry.n_views * geometry.n_bins)
    throw ShapeError("back_project: sinogram values do not match its geometry");
  require_support(geometry, nx, ny);
  SliceImage image(nx, ny);
  auto& px = image.storage();
  for (std::size_t v = 0; v < geometry.n_views; ++v) {
    const double t = geometry.angle_rad(v);
    const double c = std::cos(t);
    const double s = std::sin(t);
    auto row = sinogram.row(v);
    for (std::size_t b = 0; b < geometry.n_bins; ++b) {
      const double val = row[b];
      if (val == 0.0) continue;
      detail::joseph_ray(nx, ny, c, s, geometry.bin_position(b),
                         [&](std::size_t idx, double w) { px[idx] += w * val; });
    }
  }
  return image;
}

/// Keeps views [range.first, range.last]; values are copied unchanged.
inline Sinogram restrict_views(const Sinogram& sinogram, ViewRange range) {
  const auto& g = sinogram.geometry();
  if (range.first > range.last || range.last >= g.n_views)
    throw GeometryError("restrict_views: range [" + std::to_string(range.first) + ", " +
                        std::to_string(range.last) + "] outside " + std::to_string(g.n_views) +
                        " views");
  ParallelGeometry sub = g;
  sub.n_views = range.count();
  sub.angle_start_deg = g.angle_deg(range.first);
  std::vector<double> values(sinogram.storage().begin() +
                                 static_cast<std::ptrdiff_t>(range.first * g.n_bins),
                             sinogram.storage().begin() +
                                 static_cast<std::ptrdiff_t>((range.last + 1) * g.n_bins));
  return Sinogram(sub, std::move(values));
}

/// Sum of each view's bins times bin spacing; equal across views for an
/// object inside the field of view.
inline std::vector<double> view_mass(const Sinogram& sinogram) {
  std::vector<double> mass(sinogram.n_views(), 0.0);
  for (std::size_t v = 0; v < sinogram.n_views(); ++v) {
    double s = 0.0;
    for (double x : sinogram.row(v)) s += x;
    mass[v] = s * sinogram.geometry().bin_spacing;
  }
  return mass;
}

}  // namespace lact
