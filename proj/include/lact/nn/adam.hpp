#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "lact/error.hpp"
#include "lact/nn/tensor.hpp"

namespace lact::nn {

template <class T>
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
};

/// One bias-corrected Adam update using the gradients stored in each param.
template <class T>
void adam_step(const std::vector<NamedParam<T>>& params, AdamState<T>& st) {
  if (st.m.empty()) {
    for (const auto& p : params) {
      st.m.emplace_back(p.param->value.shape());
      st.v.emplace_back(p.param->value.shape());
    }
  }
  if (st.m.size() != params.size()) throw ShapeError("adam: parameter count changed");
  ++st.step;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  const T b1 = static_cast<T>(st.beta1), b2 = static_cast<T>(st.beta2);
  const T lr = static_cast<T>(st.lr);
  const T ic1 = static_cast<T>(1.0 / c1), ic2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(st.eps);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& val = params[k].param->value;
    const auto& grad = params[k].param->grad;
    auto& m = st.m[k];
    auto& v = st.v[k];
    if (m.shape() != val.shape() || grad.shape() != val.shape())
      throw ShapeError("adam: shape mismatch for " + params[k].name);
    for (std::size_t i = 0; i < val.size(); ++i) {
      const T g = grad[i];
      m[i] = b1 * m[i] + (T{1} - b1) * g;
      v[i] = b2 * v[i] + (T{1} - b2) * g * g;
      const T mh = m[i] * ic1;
      const T vh = v[i] * ic2;
      val[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
}

}  // namespace lact::nn
