#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "lact/error.hpp"
#include "lact/geometry.hpp"
#include "lact/image.hpp"
#include "lact/projector.hpp"
#include "lact/volume.hpp"

namespace lact {

/// Stateless 64-bit mixer used to derive independent per-sample seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

enum class ShapeKind { ellipse, rectangle };

/// One primitive in image coordinates (pixels, origin at the grid center).
/// half_u/half_v are semi-axes for ellipses and half-extents for rectangles.
struct Shape {
  ShapeKind kind = ShapeKind::ellipse;
  double cx = 0.0;
  double cy = 0.0;
  double half_u = 1.0;
  double half_v = 1.0;
  double rotation = 0.0;
  double lac = 0.0;

  bool contains(double x, double y) const {
    const double dx = x - cx;
    const double dy = y - cy;
    const double c = std::cos(rotation);
    const double s = std::sin(rotation);
    const double u = dx * c + dy * s;
    const double v = -dx * s + dy * c;
    if (kind == ShapeKind::ellipse) {
      const double a = u / half_u;
      const double b = v / half_v;
      return a * a + b * b <= 1.0;
    }
    return std::abs(u) <= half_u && std::abs(v) <= half_v;
  }

  /// Radius of the smallest origin-centered disk containing the shape.
  double reach() const {
    const double extent = kind == ShapeKind::ellipse ? std::max(half_u, half_v)
                                                     : std::hypot(half_u, half_v);
    return std::hypot(cx, cy) + extent;
  }
};

/// Random scene description. Sizes are fractions of the shorter image side.
struct PhantomSpec {
  std::uint64_t seed = 0;
  std::size_t min_shapes = 1;
  std::size_t max_shapes = 4;
  bool ellipses = true;
  bool rectangles = true;
  double min_size_frac = 0.05;
  double max_size_frac = 0.25;
  double min_lac = 0.01;
  double max_lac = 0.05;
  std::size_t supersample = 4;
};

/// Radius inside which every shape must lie.
inline double inscribed_radius(std::size_t nx, std::size_t ny) {
  return static_cast<double>(std::min(nx, ny)) / 2.0 - 1.0;
}

inline void validate(const PhantomSpec& spec) {
  if (spec.min_shapes > spec.max_shapes) throw ArgumentError("phantom: min_shapes > max_shapes");
  if (spec.max_shapes > 0 && !spec.ellipses && !spec.rectangles)
    throw ArgumentError("phantom: no shape kind enabled");
  if (!(spec.min_size_frac > 0.0) || spec.min_size_frac > spec.max_size_frac)
    throw ArgumentError("phantom: invalid size range");
  if (!(spec.min_lac >= 0.0) || spec.min_lac > spec.max_lac)
    throw ArgumentError("phantom: invalid LAC range");
  if (spec.supersample == 0) throw ArgumentError("phantom: supersample must be positive");
}

/// Draws the shapes of a scene; every shape's reach stays inside the
/// inscribed circle.
inline std::vector<Shape> sample_shapes(const PhantomSpec& spec, std::size_t nx, std::size_t ny) {
  validate(spec);
  if (nx < 8 || ny < 8) throw ShapeError("phantom: image sides must be at least 8");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double side = static_cast<double>(std::min(nx, ny));
  const double radius = inscribed_radius(nx, ny);
  const auto count = spec.min_shapes + static_cast<std::size_t>(
                                           unit(rng) * static_cast<double>(spec.max_shapes - spec.min_shapes + 1));
  std::vector<Shape> shapes;
  for (std::size_t k = 0; k < std::min(count, spec.max_shapes); ++k) {
    Shape sh;
    if (spec.ellipses && spec.rectangles)
      sh.kind = unit(rng) < 0.5 ? ShapeKind::ellipse : ShapeKind::rectangle;
    else
      sh.kind = spec.ellipses ? ShapeKind::ellipse : ShapeKind::rectangle;
    const double lo = spec.min_size_frac * side;
    const double hi = spec.max_size_frac * side;
    sh.half_u = lo + (hi - lo) * unit(rng);
    sh.half_v = lo + (hi - lo) * unit(rng);
    sh.rotation = std::numbers::pi * unit(rng);
    sh.lac = spec.min_lac + (spec.max_lac - spec.min_lac) * unit(rng);
    double extent = sh.kind == ShapeKind::ellipse ? std::max(sh.half_u, sh.half_v)
                                                  : std::hypot(sh.half_u, sh.half_v);
    if (extent > radius) {
      const double shrink = radius / extent;
      sh.half_u *= shrink;
      sh.half_v *= shrink;
      extent = radius;
    }
    const double rho = (radius - extent) * std::sqrt(unit(rng));
    const double phi = 2.0 * std::numbers::pi * unit(rng);
    sh.cx = rho * std::cos(phi);
    sh.cy = rho * std::sin(phi);
    shapes.push_back(sh);
  }
  return shapes;
}

/// Rasterizes shapes with supersample^2 point samples per pixel; overlapping
/// shapes add.
inline SliceImage rasterize(const std::vector<Shape>& shapes, std::size_t nx, std::size_t ny,
                            std::size_t supersample = 4) {
  SliceImage img(nx, ny);
  const double cx = (static_cast<double>(nx) - 1.0) / 2.0;
  const double cy = (static_cast<double>(ny) - 1.0) / 2.0;
  const double ss = static_cast<double>(supersample);
  const double area = 1.0 / (ss * ss);
  for (const auto& sh : shapes) {
    const double reach = sh.kind == ShapeKind::ellipse ? std::max(sh.half_u, sh.half_v)
                                                       : std::hypot(sh.half_u, sh.half_v);
    const auto lo_x = static_cast<long>(std::floor(sh.cx - reach + cx - 1.0));
    const auto hi_x = static_cast<long>(std::ceil(sh.cx + reach + cx + 1.0));
    const auto lo_y = static_cast<long>(std::floor(sh.cy - reach + cy - 1.0));
    const auto hi_y = static_cast<long>(std::ceil(sh.cy + reach + cy + 1.0));
    for (long iy = std::max(0L, lo_y); iy <= std::min<long>(static_cast<long>(ny) - 1, hi_y); ++iy) {
      for (long ix = std::max(0L, lo_x); ix <= std::min<long>(static_cast<long>(nx) - 1, hi_x); ++ix) {
        std::size_t hits = 0;
        for (std::size_t sy = 0; sy < supersample; ++sy) {
          const double y = static_cast<double>(iy) - cy - 0.5 + (static_cast<double>(sy) + 0.5) / ss;
          for (std::size_t sx = 0; sx < supersample; ++sx) {
            const double x = static_cast<double>(ix) - cx - 0.5 + (static_cast<double>(sx) + 0.5) / ss;
            if (sh.contains(x, y)) ++hits;
          }
        }
        if (hits) img.at(static_cast<std::size_t>(ix), static_cast<std::size_t>(iy)) +=
            sh.lac * static_cast<double>(hits) * area;
      }
    }
  }
  return img;
}

inline SliceImage gen_phantom(const PhantomSpec& spec, std::size_t nx, std::size_t ny) {
  return rasterize(sample_shapes(spec, nx, ny), nx, ny, spec.supersample);
}

struct SamplePair {
  SliceImage image;
  Sinogram sinogram;
};

/// Phantom/full-view sinogram pairs; sample i uses seed derive_seed(seed, i).
inline std::vector<SamplePair> gen_dataset(std::size_t n_samples, std::uint64_t seed,
                                           const ParallelGeometry& geometry, std::size_t nx,
                                           std::size_t ny, PhantomSpec base = {}) {
  validate(geometry);
  require_support(geometry, nx, ny);
  std::vector<SamplePair> out;
  out.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    base.seed = derive_seed(seed, i);
    auto img = gen_phantom(base, nx, ny);
    auto sino = forward_project(img, geometry);
    out.push_back({std::move(img), std::move(sino)});
  }
  return out;
}

/// A synthetic "bag": disjoint ellipsoids and boxes with one label each.
struct BagPhantom {
  Volume volume;
  LabelVolume labels;
};

struct BagSpec {
  std::uint64_t seed = 0;
  std::size_t n_objects = 4;
  double min_half = 6.0;
  double max_half = 13.0;
  double min_lac = 0.02;
  double max_lac = 0.05;
  double gap = 3.0;
};

inline BagPhantom gen_bag(const BagSpec& spec, std::size_t nx, std::size_t ny, std::size_t nz) {
  if (nx < 8 || ny < 8 || nz < 8) throw ShapeError("gen_bag: volume sides must be at least 8");
  struct Obj {
    bool box;
    double cx, cy, cz, ax, ay, az, lac;
  };
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double radius = inscribed_radius(nx, ny);
  const double zc = (static_cast<double>(nz) - 1.0) / 2.0;
  std::vector<Obj> objs;
  for (std::size_t attempt = 0; objs.size() < spec.n_objects && attempt < 10000; ++attempt) {
    Obj o{};
    o.box = unit(rng) < 0.4;
    o.ax = spec.min_half + (spec.max_half - spec.min_half) * unit(rng);
    o.ay = spec.min_half + (spec.max_half - spec.min_half) * unit(rng);
    o.az = spec.min_half + (spec.max_half - spec.min_half) * unit(rng);
    o.az = std::min(o.az, zc - 2.0);
    o.lac = spec.min_lac + (spec.max_lac - spec.min_lac) * unit(rng);
    const double ext_xy = o.box ? std::hypot(o.ax, o.ay) : std::max(o.ax, o.ay);
    if (ext_xy >= radius) continue;
    const double rho = (radius - ext_xy) * std::sqrt(unit(rng));
    const double phi = 2.0 * std::numbers::pi * unit(rng);
    o.cx = rho * std::cos(phi);
    o.cy = rho * std::sin(phi);
    o.cz = (unit(rng) * 2.0 - 1.0) * (zc - o.az - 2.0);
    // Axis-aligned bounding boxes separated by at least `gap` on some axis.
    bool clear = true;
    for (const auto& p : objs) {
      const bool sep = std::abs(o.cx - p.cx) >= o.ax + p.ax + spec.gap ||
                       std::abs(o.cy - p.cy) >= o.ay + p.ay + spec.gap ||
                       std::abs(o.cz - p.cz) >= o.az + p.az + spec.gap;
      if (!sep) clear = false;
    }
    if (clear) objs.push_back(o);
  }
  BagPhantom bag{Volume{Grid3<double>(nx, ny, nz), 1.0}, LabelVolume(nx, ny, nz)};
  const double cx = (static_cast<double>(nx) - 1.0) / 2.0;
  const double cy = (static_cast<double>(ny) - 1.0) / 2.0;
  for (std::size_t z = 0; z < nz; ++z)
    for (std::size_t y = 0; y < ny; ++y)
      for (std::size_t x = 0; x < nx; ++x) {
        const double px = static_cast<double>(x) - cx;
        const double py = static_cast<double>(y) - cy;
        const double pz = static_cast<double>(z) - zc;
        for (std::size_t k = 0; k < objs.size(); ++k) {
          const auto& o = objs[k];
          const double u = (px - o.cx) / o.ax;
          const double v = (py - o.cy) / o.ay;
          const double w = (pz - o.cz) / o.az;
          const bool in = o.box ? (std::abs(u) <= 1.0 && std::abs(v) <= 1.0 && std::abs(w) <= 1.0)
                                : (u * u + v * v + w * w <= 1.0);
          if (in) {
            bag.volume.grid.at(x, y, z) = o.lac;
            bag.labels.at(x, y, z) = static_cast<std::int32_t>(k + 1);
          }
        }
      }
  return bag;
}

}  // namespace lact
