#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "lact/error.hpp"
#include "lact/image.hpp"
#include "lact/projector.hpp"

namespace lact {

struct QualityReport {
  double psnr_db = 0.0;
  double ssim = 0.0;
  std::optional<double> s_psnr_db;
};

/// 10 log10(peak^2 / MSE) with peak = max(truth); +inf when MSE is zero.
inline double psnr_values(std::span<const double> recon, std::span<const double> truth) {
  if (recon.size() != truth.size() || truth.empty()) throw ShapeError("psnr: size mismatch");
  const double peak = *std::max_element(truth.begin(), truth.end());
  if (!(peak > 0.0)) throw ArgumentError("psnr: reference has no positive peak");
  double se = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = recon[i] - truth[i];
    se += d * d;
  }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = se / static_cast<double>(truth.size());
  return 10.0 * std::log10(peak * peak / mse);
}

inline double psnr(const SliceImage& recon, const SliceImage& truth) {
  if (!recon.same_shape(truth)) throw ShapeError("psnr: image shapes differ");
  return psnr_values(recon.values(), truth.values());
}

struct SsimParams {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  /// Dynamic range; when unset, max(truth) - min(truth).
  std::optional<double> data_range;
};

/// Mean local SSIM over every window position fully inside the image, using
/// a normalized Gaussian window and population (weighted) moments.
inline double ssim(const SliceImage& recon, const SliceImage& truth, const SsimParams& p = {}) {
  if (!recon.same_shape(truth)) throw ShapeError("ssim: image shapes differ");
  const std::size_t nx = truth.nx(), ny = truth.ny(), w = p.window;
  if (nx < w || ny < w) throw ShapeError("ssim: image smaller than the window");
  double range = 0.0;
  if (p.data_range) {
    range = *p.data_range;
  } else {
    const auto [lo, hi] = std::minmax_element(truth.storage().begin(), truth.storage().end());
    range = *hi - *lo;
  }
  if (!(range > 0.0)) throw ArgumentError("ssim: constant reference has no dynamic range");

  std::vector<double> g(w);
  const double mid = (static_cast<double>(w) - 1.0) / 2.0;
  double gs = 0.0;
  for (std::size_t i = 0; i < w; ++i) {
    const double d = static_cast<double>(i) - mid;
    g[i] = std::exp(-d * d / (2.0 * p.sigma * p.sigma));
    gs += g[i];
  }
  for (double& x : g) x /= gs;

  const double c1 = (p.k1 * range) * (p.k1 * range);
  const double c2 = (p.k2 * range) * (p.k2 * range);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t oy = 0; oy + w <= ny; ++oy) {
    for (std::size_t ox = 0; ox + w <= nx; ++ox) {
      double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
      for (std::size_t j = 0; j < w; ++j) {
        for (std::size_t i = 0; i < w; ++i) {
          const double wt = g[i] * g[j];
          const double a = recon.at(ox + i, oy + j);
          const double b = truth.at(ox + i, oy + j);
          mx += wt * a;
          my += wt * b;
          xx += wt * a * a;
          yy += wt * b * b;
          xy += wt * a * b;
        }
      }
      const double vx = xx - mx * mx;
      const double vy = yy - my * my;
      const double cxy = xy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

/// PSNR between the projection of `recon` over the truth sinogram's geometry
/// and that sinogram; peak = max(truth sinogram).
inline double s_psnr(const SliceImage& recon, const Sinogram& truth_full) {
  const Sinogram proj = forward_project(recon, truth_full.geometry());
  return psnr_values(proj.values(), truth_full.values());
}

inline QualityReport evaluate_quality(const SliceImage& recon, const SliceImage& truth,
                                      const Sinogram* truth_full = nullptr) {
  QualityReport q;
  q.psnr_db = psnr(recon, truth);
  q.ssim = ssim(recon, truth);
  if (truth_full) q.s_psnr_db = s_psnr(recon, *truth_full);
  return q;
}

}  // namespace lact
