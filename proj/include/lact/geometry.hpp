#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>

#include "lact/error.hpp"

namespace lact {

/// Parallel-beam acquisition: evenly spaced view angles and a flat detector.
///
/// Lengths are measured in image pixels. Bin j sits at detector coordinate
/// r_j = (j - detector_center) * bin_spacing, and view i at
/// angle_start_deg + i * angle_step_deg.
struct ParallelGeometry {
  std::size_t n_views = 0;
  double angle_start_deg = 0.0;
  double angle_step_deg = 1.0;
  std::size_t n_bins = 0;
  double bin_spacing = 1.0;
  double detector_center = 0.0;

  double angle_deg(std::size_t view) const {
    return angle_start_deg + static_cast<double>(view) * angle_step_deg;
  }
  double angle_rad(std::size_t view) const {
    return angle_deg(view) * std::numbers::pi / 180.0;
  }
  double step_rad() const { return angle_step_deg * std::numbers::pi / 180.0; }
  double bin_position(std::size_t bin) const {
    return (static_cast<double>(bin) - detector_center) * bin_spacing;
  }

  /// True when every ray through an nx-by-ny image lands on the detector.
  bool supports(std::size_t nx, std::size_t ny) const {
    return n_bins >= min_bins_for(nx, ny);
  }

  static std::size_t min_bins_for(std::size_t nx, std::size_t ny) {
    const double side = static_cast<double>(nx > ny ? nx : ny);
    return static_cast<std::size_t>(std::ceil(std::numbers::sqrt2 * side - 1e-9));
  }

  friend bool operator==(const ParallelGeometry&, const ParallelGeometry&) = default;
};

/// Throws GeometryError unless the geometry satisfies its invariants.
inline void validate(const ParallelGeometry& g) {
  if (g.n_views == 0) throw GeometryError("geometry: n_views must be positive");
  if (g.n_bins == 0) throw GeometryError("geometry: n_bins must be positive");
  if (!(g.angle_step_deg > 0.0) || !std::isfinite(g.angle_step_deg))
    throw GeometryError("geometry: angle_step_deg must be positive");
  if (!(g.bin_spacing > 0.0) || !std::isfinite(g.bin_spacing))
    throw GeometryError("geometry: bin_spacing must be positive");
  if (!std::isfinite(g.angle_start_deg) || !std::isfinite(g.detector_center))
    throw GeometryError("geometry: non-finite start angle or detector center");
  const double last = g.angle_start_deg + static_cast<double>(g.n_views - 1) * g.angle_step_deg;
  if (last - g.angle_start_deg >= 180.0)
    throw GeometryError("geometry: angular span must stay below 180 degrees");
}

inline ParallelGeometry make_geometry(std::size_t n_views, double angle_start_deg,
                                      double angle_step_deg, std::size_t n_bins,
                                      double bin_spacing = 1.0) {
  ParallelGeometry g;
  g.n_views = n_views;
  g.angle_start_deg = angle_start_deg;
  g.angle_step_deg = angle_step_deg;
  g.n_bins = n_bins;
  g.bin_spacing = bin_spacing;
  g.detector_center = n_bins == 0 ? 0.0 : (static_cast<double>(n_bins) - 1.0) / 2.0;
  validate(g);
  return g;
}

/// 180 views at 1 degree over [0, 180) for a 64x64 slice.
inline ParallelGeometry desk_full_geometry() { return make_geometry(180, 0.0, 1.0, 93, 1.0); }

inline void require_support(const ParallelGeometry& g, std::size_t nx, std::size_t ny) {
  if (!g.supports(nx, ny))
    throw GeometryError("geometry: " + std::to_string(g.n_bins) + " bins cannot cover a " +
                        std::to_string(nx) + "x" + std::to_string(ny) + " image (need " +
                        std::to_string(ParallelGeometry::min_bins_for(nx, ny)) + ")");
}

/// Inclusive range of view indices.
struct ViewRange {
  std::size_t first = 0;
  std::size_t last = 0;

  std::size_t count() const { return last - first + 1; }
};

}  // namespace lact
