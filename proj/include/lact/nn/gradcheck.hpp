#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "lact/nn/network.hpp"
#include "lact/nn/tensor.hpp"

namespace lact::nn {

struct GradCheckOptions {
  double eps = 1e-4;
  /// Parameter coordinates sampled (all of them when fewer exist).
  std::size_t coords = 200;
  /// Input coordinates sampled in addition.
  std::size_t input_coords = 50;
  /// Denominator floor so that near-zero gradients compare absolutely.
  double floor = 1e-6;
  /// Central differences at eps and eps/2 agree to O(eps^2) on smooth
  /// coordinates; a relu or max-pool kink inside the step makes them disagree
  /// by about the error it causes. Such coordinates are skipped.
  double kink_tol = 1e-5;
  std::uint64_t seed = 0;
};

struct GradCheckStats {
  std::size_t checked = 0;
  std::size_t kinks = 0;
};

namespace detail {

/// Central difference of loss at x, or nullopt when x sits on a kink.
template <class LossFn>
std::optional<double> central_slope(double& x, LossFn& loss, const GradCheckOptions& opt) {
  const double saved = x;
  auto diff = [&](double h) {
    x = saved + h;
    const double lp = loss();
    x = saved - h;
    const double lm = loss();
    x = saved;
    return (lp - lm) / (2.0 * h);
  };
  const double d1 = diff(opt.eps), d2 = diff(opt.eps / 2.0);
  if (std::abs(d1 - d2) > opt.kink_tol * std::max({std::abs(d1), std::abs(d2), opt.floor}))
    return std::nullopt;
  return d1;
}

}  // namespace detail

inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares stored analytic gradients against central differences of `loss`
/// for a random subset of coordinates of `params`; kinks are skipped and
/// counted in `stats`. `loss` must recompute the scalar from scratch.
template <class LossFn>
double check_param_grads(const std::vector<NamedParam<double>>& params, LossFn&& loss,
                         const GradCheckOptions& opt, GradCheckStats* stats = nullptr) {
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t k = 0; k < params.size(); ++k)
    for (std::size_t i = 0; i < params[k].param->value.size(); ++i) all.emplace_back(k, i);
  std::mt19937_64 rng(opt.seed);
  std::shuffle(all.begin(), all.end(), rng);
  if (all.size() > opt.coords) all.resize(opt.coords);
  double worst = 0.0;
  for (auto [k, i] : all) {
    const auto numeric = detail::central_slope(params[k].param->value[i], loss, opt);
    if (stats) ++(numeric ? stats->checked : stats->kinks);
    if (numeric) worst = std::max(worst, relative_error(params[k].param->grad[i], *numeric, opt.floor));
  }
  return worst;
}

/// Finite-difference check of a network under the loss sum(out * R) with a
/// fixed random R. Runs in train mode (batch statistics); dropout layers
/// should have rate 0. Returns the maximum relative error over sampled
/// parameter and input coordinates.
inline double grad_check(Network<double>& net, const Tensor<double>& input,
                         const GradCheckOptions& opt = {}, GradCheckStats* stats = nullptr) {
  std::mt19937_64 rng(opt.seed ^ 0x5eedULL);
  std::normal_distribution<double> nd(0.0, 1.0);
  Tensor<double> probe = net.forward(input, Mode::train);
  for (auto& v : probe.storage()) v = nd(rng);
  Tensor<double> x = input;
  auto loss = [&] {
    const Tensor<double> y = net.forward(x, Mode::train);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * probe[i];
    return s;
  };

  auto params = net.params();
  net.zero_grad();
  net.forward(x, Mode::train);
  const Tensor<double> gin = net.backward(probe);
  double worst = check_param_grads(params, loss, opt, stats);

  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  if (idx.size() > opt.input_coords) idx.resize(opt.input_coords);
  for (std::size_t i : idx) {
    const auto numeric = detail::central_slope(x[i], loss, opt);
    if (stats) ++(numeric ? stats->checked : stats->kinks);
    if (numeric) worst = std::max(worst, relative_error(gin[i], *numeric, opt.floor));
  }
  return worst;
}

}  // namespace lact::nn
