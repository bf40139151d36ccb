#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lact/error.hpp"
#include "lact/geometry.hpp"

namespace lact {

/// Row-major 2D slice of linear attenuation coefficients.
///
/// Pixel (ix, iy) is centered at x = ix - (nx-1)/2, y = iy - (ny-1)/2; pixels
/// have unit side length.
class SliceImage {
 public:
  SliceImage() = default;
  SliceImage(std::size_t nx, std::size_t ny, double fill = 0.0)
      : nx_(nx), ny_(ny), values_(nx * ny, fill) {}
  SliceImage(std::size_t nx, std::size_t ny, std::vector<double> values)
      : nx_(nx), ny_(ny), values_(std::move(values)) {
    if (values_.size() != nx_ * ny_)
      throw ShapeError("SliceImage: " + std::to_string(values_.size()) +
                       " values for a " + std::to_string(nx) + "x" + std::to_string(ny) +
                       " grid");
  }

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t size() const { return values_.size(); }

  double& at(std::size_t ix, std::size_t iy) { return values_[iy * nx_ + ix]; }
  double at(std::size_t ix, std::size_t iy) const { return values_[iy * nx_ + ix]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& storage() { return values_; }
  const std::vector<double>& storage() const { return values_; }

  double x_of(std::size_t ix) const { return static_cast<double>(ix) - (static_cast<double>(nx_) - 1.0) / 2.0; }
  double y_of(std::size_t iy) const { return static_cast<double>(iy) - (static_cast<double>(ny_) - 1.0) / 2.0; }

  bool same_shape(const SliceImage& o) const { return nx_ == o.nx_ && ny_ == o.ny_; }

  friend bool operator==(const SliceImage&, const SliceImage&) = default;

 private:
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  std::vector<double> values_;
};

/// Line integrals: one row per view, one column per detector bin.
class Sinogram {
 public:
  Sinogram() = default;
  explicit Sinogram(const ParallelGeometry& geometry)
      : geometry_(geometry), values_(geometry.n_views * geometry.n_bins, 0.0) {}
  Sinogram(const ParallelGeometry& geometry, std::vector<double> values)
      : geometry_(geometry), values_(std::move(values)) {
    if (values_.size() != geometry_.n_views * geometry_.n_bins)
      throw ShapeError("Sinogram: " + std::to_string(values_.size()) + " values for " +
                       std::to_string(geometry_.n_views) + " views x " +
                       std::to_string(geometry_.n_bins) + " bins");
  }

  const ParallelGeometry& geometry() const { return geometry_; }
  std::size_t n_views() const { return geometry_.n_views; }
  std::size_t n_bins() const { return geometry_.n_bins; }
  std::size_t size() const { return values_.size(); }

  double& at(std::size_t view, std::size_t bin) { return values_[view * geometry_.n_bins + bin]; }
  double at(std::size_t view, std::size_t bin) const { return values_[view * geometry_.n_bins + bin]; }

  std::span<double> row(std::size_t view) {
    return std::span<double>(values_).subspan(view * geometry_.n_bins, geometry_.n_bins);
  }
  std::span<const double> row(std::size_t view) const {
    return std::span<const double>(values_).subspan(view * geometry_.n_bins, geometry_.n_bins);
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& storage() { return values_; }
  const std::vector<double>& storage() const { return values_; }

  friend bool operator==(const Sinogram&, const Sinogram&) = default;

 private:
  ParallelGeometry geometry_;
  std::vector<double> values_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace lact
