#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "lact/error.hpp"
#include "lact/image.hpp"
#include "lact/projector.hpp"

namespace lact {

/// Diagonal of W, one entry per sinogram element.
struct WlsWeights {
  std::vector<double> diag;
};

struct WlsConfig {
  std::size_t max_iters = 50;
  double rel_tol = 1e-6;
  bool record_history = true;
};

struct WlsResult {
  SliceImage image;
  std::size_t iterations_used = 0;
  /// ||A^T W (S - A Y_k)|| for k = 0..iterations_used.
  std::vector<double> residual_history;
  /// (S - A Y_k)^T W (S - A Y_k) for k = 0..iterations_used.
  std::vector<double> objective_history;
};

/// W_ii = exp(-S_i).
inline WlsWeights wls_weights(const Sinogram& sinogram) {
  WlsWeights w;
  w.diag.reserve(sinogram.size());
  for (double s : sinogram.values()) w.diag.push_back(std::exp(-s));
  return w;
}

inline void validate(const WlsConfig& c) {
  if (c.max_iters < 1) throw ArgumentError("wls: max_iters must be at least 1");
  if (!(c.rel_tol > 0.0 && c.rel_tol < 1.0)) throw ArgumentError("wls: rel_tol must lie in (0, 1)");
}

namespace detail {

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline double weighted_sq(std::span<const double> r, const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) s += w[i] * r[i] * r[i];
  return s;
}

}  // namespace detail

/// Minimizes (S - A Y)^T W (S - A Y) with the given weights from Y = 0.
///
/// The normal equations A^T W A Y = A^T W S are solved with the conjugate
/// residual method, which keeps both the normal residual norm and the weighted
/// objective non-increasing. No regularizer and no positivity constraint.
inline WlsResult wls_reconstruct(const Sinogram& sinogram, std::size_t nx, std::size_t ny,
                                 const WlsWeights& weights, const WlsConfig& config = {}) {
  validate(config);
  validate(sinogram.geometry());
  require_support(sinogram.geometry(), nx, ny);
  if (weights.diag.size() != sinogram.size())
    throw ShapeError("wls: weight count does not match the sinogram");
  if (!all_finite(sinogram.values())) throw NumericError("wls: sinogram has non-finite entries");

  const auto& g = sinogram.geometry();
  const auto& w = weights.diag;
  // normal(x) = A^T W A x
  auto normal = [&](const SliceImage& x) {
    Sinogram ax = forward_project(x, g);
    auto& v = ax.storage();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] *= w[i];
    return back_project(ax, nx, ny);
  };
  auto objective = [&](const SliceImage& x) {
    Sinogram ax = forward_project(x, g);
    auto& v = ax.storage();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = sinogram.storage()[i] - v[i];
    return detail::weighted_sq(v, w);
  };

  Sinogram ws(g);
  for (std::size_t i = 0; i < ws.size(); ++i) ws.storage()[i] = w[i] * sinogram.storage()[i];
  const SliceImage b = back_project(ws, nx, ny);

  WlsResult res{SliceImage(nx, ny), 0, {}, {}};
  SliceImage r = b;
  const double bnorm = norm2(b.values());
  double rnorm = bnorm;
  if (config.record_history) {
    res.residual_history.push_back(rnorm);
    res.objective_history.push_back(detail::weighted_sq(sinogram.values(), w));
  }
  if (bnorm == 0.0) return res;

  SliceImage p = r;
  SliceImage mr = normal(r);
  SliceImage mp = mr;
  double rmr = dot(r.values(), mr.values());

  for (std::size_t k = 0; k < config.max_iters; ++k) {
    const double mpmp = dot(mp.values(), mp.values());
    if (mpmp <= 0.0 || rmr <= 0.0) break;
    const double alpha = rmr / mpmp;
    detail::axpy(alpha, p.values(), res.image.values());
    detail::axpy(-alpha, mp.values(), r.values());
    rnorm = norm2(r.values());
    res.iterations_used = k + 1;
    if (!std::isfinite(rnorm) || !all_finite(res.image.values()))
      throw NumericError("wls: non-finite iterate at iteration " + std::to_string(k + 1));
    if (config.record_history) {
      res.residual_history.push_back(rnorm);
      res.objective_history.push_back(objective(res.image));
    }
    if (rnorm <= config.rel_tol * bnorm) break;
    mr = normal(r);
    const double rmr_next = dot(r.values(), mr.values());
    const double beta = rmr_next / rmr;
    rmr = rmr_next;
    for (std::size_t i = 0; i < p.size(); ++i) {
      p.storage()[i] = r.storage()[i] + beta * p.storage()[i];
      mp.storage()[i] = mr.storage()[i] + beta * mp.storage()[i];
    }
  }
  return res;
}

inline WlsResult wls_reconstruct(const Sinogram& sinogram, std::size_t nx, std::size_t ny,
                                 const WlsConfig& config = {}) {
  return wls_reconstruct(sinogram, nx, ny, wls_weights(sinogram), config);
}

}  // namespace lact
