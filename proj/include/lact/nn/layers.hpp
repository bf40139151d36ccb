#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lact/error.hpp"
#include "lact/nn/tensor.hpp"

namespace lact::nn {

/// backward() called without a matching train-mode forward().
class MissingCacheError : public Error {
 public:
  using Error::Error;
};

enum class LayerKind {
  conv1d,
  conv2d,
  dense,
  batchnorm,
  relu,
  leaky_relu,
  sigmoid,
  upsample2x,
  residual_block,
  max_over_time,
  dropout,
  reshape,
  scale,
};

inline const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::dense: return "dense";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::relu: return "relu";
    case LayerKind::leaky_relu: return "leaky_relu";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::upsample2x: return "upsample2x";
    case LayerKind::residual_block: return "residual_block";
    case LayerKind::max_over_time: return "max_over_time";
    case LayerKind::dropout: return "dropout";
    case LayerKind::reshape: return "reshape";
    case LayerKind::scale: return "scale";
  }
  return "?";
}

/// Hyperparameters of one layer. Fields a kind does not use are ignored.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t window = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  double slope = 0.2;
  double rate = 0.0;
  double momentum = 0.9;
  double eps = 1e-5;
  /// Per-item output shape for reshape.
  std::vector<std::size_t> target{};

  static LayerSpec conv1d(std::size_t in, std::size_t out, std::size_t window) {
    return {.kind = LayerKind::conv1d, .in_channels = in, .out_channels = out, .window = window};
  }
  static LayerSpec conv2d(std::size_t in, std::size_t out, std::size_t window,
                          std::size_t stride = 1, std::size_t padding = 0) {
    return {.kind = LayerKind::conv2d, .in_channels = in, .out_channels = out, .window = window,
            .stride = stride, .padding = padding};
  }
  static LayerSpec dense(std::size_t in, std::size_t out) {
    return {.kind = LayerKind::dense, .in_channels = in, .out_channels = out};
  }
  static LayerSpec batchnorm(std::size_t channels) {
    return {.kind = LayerKind::batchnorm, .in_channels = channels, .out_channels = channels};
  }
  static LayerSpec relu() { return {.kind = LayerKind::relu}; }
  static LayerSpec leaky_relu(double slope = 0.2) { return {.kind = LayerKind::leaky_relu, .slope = slope}; }
  static LayerSpec sigmoid() { return {.kind = LayerKind::sigmoid}; }
  static LayerSpec upsample2x() { return {.kind = LayerKind::upsample2x}; }
  static LayerSpec residual_block(std::size_t channels) {
    return {.kind = LayerKind::residual_block, .in_channels = channels, .out_channels = channels,
            .window = 3, .padding = 1};
  }
  static LayerSpec max_over_time() { return {.kind = LayerKind::max_over_time}; }
  static LayerSpec dropout(double rate) { return {.kind = LayerKind::dropout, .rate = rate}; }
  static LayerSpec reshape(std::vector<std::size_t> target) {
    return {.kind = LayerKind::reshape, .target = std::move(target)};
  }
  /// Fixed (non-trainable) multiplier; `slope` holds the factor.
  static LayerSpec scale(double factor) { return {.kind = LayerKind::scale, .slope = factor}; }
};

template <class T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual LayerKind kind() const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
  /// Accumulates parameter gradients and returns the input gradient.
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual void collect_params(const std::string&, std::vector<NamedParam<T>>&) {}
  virtual void collect_buffers(const std::string&, std::vector<NamedBuffer<T>>&) {}
  virtual std::unique_ptr<Layer<T>> clone() const = 0;
  /// Drops cached activations.
  virtual void clear_cache() = 0;
};

namespace detail {

inline void require_rank(const std::vector<std::size_t>& shape, std::size_t rank, const char* who) {
  if (shape.size() != rank)
    throw ShapeError(std::string(who) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(shape));
}

inline void require_cache(bool ok, const char* who) {
  if (!ok) throw MissingCacheError(std::string(who) + ": backward called without a forward cache");
}

inline void require_same(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b,
                         const char* who) {
  if (a != b)
    throw ShapeError(std::string(who) + ": gradient shape " + shape_str(a) + " does not match " +
                     shape_str(b));
}

/// Centered uniform init with standard deviation sqrt(2 / fan_in).
template <class T>
Tensor<T> he_uniform(std::vector<std::size_t> shape, std::size_t fan_in, std::mt19937_64& rng) {
  Tensor<T> t(std::move(shape));
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-a, a);
  for (auto& v : t.storage()) v = static_cast<T>(u(rng));
  return t;
}

/// Row-major matrix views over raw buffers for the GEMM-based layers.
template <class T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using CMatMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace detail

/// Valid 1D convolution along the last axis: (N, C, L) -> (N, F, L - K + 1).
template <class T>
class Conv1d final : public Layer<T> {
 public:
  Conv1d(const LayerSpec& s, std::mt19937_64& rng)
      : in_(s.in_channels), out_(s.out_channels), k_(s.window),
        w_(detail::he_uniform<T>({s.out_channels, s.in_channels, s.window}, s.in_channels * s.window, rng)),
        b_(Tensor<T>({s.out_channels})) {
    if (!in_ || !out_ || !k_) throw ArgumentError("conv1d: channels and window must be positive");
  }
  LayerKind kind() const override { return LayerKind::conv1d; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv1d>(*this); }
  void clear_cache() override { x_ = Tensor<T>(); }

  Param<T>& weight() { return w_; }
  Param<T>& bias() { return b_; }

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    detail::require_rank(x.shape(), 3, "conv1d");
    if (x.dim(1) != in_)
      throw ShapeError("conv1d: expected " + std::to_string(in_) + " input channels, got " +
                       std::to_string(x.dim(1)));
    const std::size_t n = x.dim(0), len = x.dim(2);
    if (len < k_)
      throw ShapeError("conv1d: sequence length " + std::to_string(len) + " shorter than window " +
                       std::to_string(k_));
    const std::size_t lo = len - k_ + 1;
    Tensor<T> y({n, out_, lo});
    AlignedVector<T> col(in_ * k_ * lo);
    detail::CMatMap<T> wm(w_.value.data(), out_, in_ * k_);
    for (std::size_t b = 0; b < n; ++b) {
      im2col(x.data() + b * in_ * len, len, lo, col.data());
      detail::MatMap<T> ym(y.data() + b * out_ * lo, out_, lo);
      ym.noalias() = wm * detail::CMatMap<T>(col.data(), in_ * k_, lo);
      for (std::size_t f = 0; f < out_; ++f) ym.row(f).array() += b_.value[f];
    }
    x_ = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    detail::require_cache(!x_.empty(), "conv1d");
    const std::size_t n = x_.dim(0), len = x_.dim(2), lo = len - k_ + 1;
    detail::require_same(g.shape(), {n, out_, lo}, "conv1d");
    Tensor<T> gx(x_.shape());
    AlignedVector<T> col(in_ * k_ * lo), gcol(in_ * k_ * lo);
    detail::CMatMap<T> wm(w_.value.data(), out_, in_ * k_);
    detail::MatMap<T> gw(w_.grad.data(), out_, in_ * k_);
    for (std::size_t b = 0; b < n; ++b) {
      detail::CMatMap<T> gm(g.data() + b * out_ * lo, out_, lo);
      for (std::size_t f = 0; f < out_; ++f) b_.grad[f] += gm.row(f).sum();
      im2col(x_.data() + b * in_ * len, len, lo, col.data());
      gw.noalias() += gm * detail::CMatMap<T>(col.data(), in_ * k_, lo).transpose();
      detail::MatMap<T>(gcol.data(), in_ * k_, lo).noalias() = wm.transpose() * gm;
      T* gi = gx.data() + b * in_ * len;
      for (std::size_t c = 0; c < in_; ++c)
        for (std::size_t k = 0; k < k_; ++k) {
          const T* src = gcol.data() + (c * k_ + k) * lo;
          T* dst = gi + c * len + k;
          for (std::size_t t = 0; t < lo; ++t) dst[t] += src[t];
        }
    }
    return gx;
  }

  void collect_params(const std::string& p, std::vector<NamedParam<T>>& out) override {
    out.push_back({p + "weight", &w_});
    out.push_back({p + "bias", &b_});
  }

 private:
  /// col[(c, k), t] = x[c, t + k]
  void im2col(const T* x, std::size_t len, std::size_t lo, T* col) const {
    for (std::size_t c = 0; c < in_; ++c)
      for (std::size_t k = 0; k < k_; ++k) std::copy(x + c * len + k, x + c * len + k + lo, col + (c * k_ + k) * lo);
  }

  std::size_t in_, out_, k_;
  Param<T> w_, b_;
  Tensor<T> x_;
};

/// 2D convolution with square kernel, stride and zero padding:
/// (N, C, H, W) -> (N, F, Ho, Wo).
template <class T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(const LayerSpec& s, std::mt19937_64& rng)
      : in_(s.in_channels), out_(s.out_channels), k_(s.window), stride_(s.stride), pad_(s.padding),
        w_(detail::he_uniform<T>({s.out_channels, s.in_channels, s.window, s.window},
                                 s.in_channels * s.window * s.window, rng)),
        b_(Tensor<T>({s.out_channels})) {
    if (!in_ || !out_ || !k_ || !stride_) throw ArgumentError("conv2d: sizes must be positive");
  }
  LayerKind kind() const override { return LayerKind::conv2d; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d>(*this); }
  void clear_cache() override { x_ = Tensor<T>(); }

  Param<T>& weight() { return w_; }
  Param<T>& bias() { return b_; }

  std::size_t out_side(std::size_t side) const {
    if (side + 2 * pad_ < k_) return 0;
    return (side + 2 * pad_ - k_) / stride_ + 1;
  }

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    detail::require_rank(x.shape(), 4, "conv2d");
    if (x.dim(1) != in_)
      throw ShapeError("conv2d: expected " + std::to_string(in_) + " input channels, got " +
                       std::to_string(x.dim(1)));
    const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const std::size_t ho = out_side(h), wo = out_side(w);
    if (!ho || !wo) throw ShapeError("conv2d: input " + shape_str(x.shape()) + " smaller than kernel");
    Tensor<T> y({n, out_, ho, wo});
    const std::size_t rows = in_ * k_ * k_, cols = ho * wo;
    AlignedVector<T> col(rows * cols);
    detail::CMatMap<T> wm(w_.value.data(), out_, rows);
    for (std::size_t b = 0; b < n; ++b) {
      im2col(x.data() + b * in_ * h * w, h, w, ho, wo, col.data());
      detail::MatMap<T> ym(y.data() + b * out_ * cols, out_, cols);
      ym.noalias() = wm * detail::CMatMap<T>(col.data(), rows, cols);
      for (std::size_t f = 0; f < out_; ++f) ym.row(f).array() += b_.value[f];
    }
    x_ = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    detail::require_cache(!x_.empty(), "conv2d");
    const std::size_t n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
    const std::size_t ho = out_side(h), wo = out_side(w);
    detail::require_same(g.shape(), {n, out_, ho, wo}, "conv2d");
    Tensor<T> gx(x_.shape());
    const std::size_t rows = in_ * k_ * k_, cols = ho * wo;
    AlignedVector<T> col(rows * cols), gcol(rows * cols);
    detail::CMatMap<T> wm(w_.value.data(), out_, rows);
    detail::MatMap<T> gw(w_.grad.data(), out_, rows);
    for (std::size_t b = 0; b < n; ++b) {
      detail::CMatMap<T> gm(g.data() + b * out_ * cols, out_, cols);
      for (std::size_t f = 0; f < out_; ++f) b_.grad[f] += gm.row(f).sum();
      im2col(x_.data() + b * in_ * h * w, h, w, ho, wo, col.data());
      gw.noalias() += gm * detail::CMatMap<T>(col.data(), rows, cols).transpose();
      detail::MatMap<T>(gcol.data(), rows, cols).noalias() = wm.transpose() * gm;
      col2im(gcol.data(), h, w, ho, wo, gx.data() + b * in_ * h * w);
    }
    return gx;
  }

  void collect_params(const std::string& p, std::vector<NamedParam<T>>& out) override {
    out.push_back({p + "weight", &w_});
    out.push_back({p + "bias", &b_});
  }

 private:
  /// col[(c, ky, kx), (oy, ox)] = x[c, oy*stride + ky - pad, ox*stride + kx - pad], zero outside.
  void im2col(const T* x, std::size_t h, std::size_t w, std::size_t ho, std::size_t wo, T* col) const {
    for (std::size_t c = 0; c < in_; ++c)
      for (std::size_t ky = 0; ky < k_; ++ky)
        for (std::size_t kx = 0; kx < k_; ++kx) {
          T* dst = col + ((c * k_ + ky) * k_ + kx) * ho * wo;
          const auto [xlo, xhi] = range(kx, w, wo);
          for (std::size_t oy = 0; oy < ho; ++oy) {
            T* drow = dst + oy * wo;
            const long iy = static_cast<long>(oy * stride_ + ky) - static_cast<long>(pad_);
            if (iy < 0 || iy >= static_cast<long>(h)) {
              std::fill(drow, drow + wo, T{0});
              continue;
            }
            const T* row = x + (c * h + static_cast<std::size_t>(iy)) * w;
            std::fill(drow, drow + xlo, T{0});
            for (std::size_t ox = xlo; ox < xhi; ++ox) drow[ox] = row[ox * stride_ + kx - pad_];
            std::fill(drow + xhi, drow + wo, T{0});
          }
        }
  }

  /// Adjoint of im2col: scatters column gradients back onto the input.
  void col2im(const T* col, std::size_t h, std::size_t w, std::size_t ho, std::size_t wo, T* gx) const {
    for (std::size_t c = 0; c < in_; ++c)
      for (std::size_t ky = 0; ky < k_; ++ky)
        for (std::size_t kx = 0; kx < k_; ++kx) {
          const T* src = col + ((c * k_ + ky) * k_ + kx) * ho * wo;
          const auto [xlo, xhi] = range(kx, w, wo);
          for (std::size_t oy = 0; oy < ho; ++oy) {
            const long iy = static_cast<long>(oy * stride_ + ky) - static_cast<long>(pad_);
            if (iy < 0 || iy >= static_cast<long>(h)) continue;
            T* row = gx + (c * h + static_cast<std::size_t>(iy)) * w;
            const T* srow = src + oy * wo;
            for (std::size_t ox = xlo; ox < xhi; ++ox) row[ox * stride_ + kx - pad_] += srow[ox];
          }
        }
  }

  /// Output columns [lo, hi) whose input column ox*stride + kx - pad is inside [0, w).
  std::pair<std::size_t, std::size_t> range(std::size_t kx, std::size_t w, std::size_t wo) const {
    std::size_t lo = 0;
    if (pad_ > kx) lo = (pad_ - kx + stride_ - 1) / stride_;
    const long top = static_cast<long>(w) - 1 + static_cast<long>(pad_) - static_cast<long>(kx);
    if (top < 0) return {0, 0};
    const std::size_t hi = std::min(wo, static_cast<std::size_t>(top) / stride_ + 1);
    return {std::min(lo, hi), hi};
  }

  std::size_t in_, out_, k_, stride_, pad_;
  Param<T> w_, b_;
  Tensor<T> x_;
};

/// Fully connected layer on the flattened item: (N, ...) -> (N, out).
template <class T>
class Dense final : public Layer<T> {
 public:
  Dense(const LayerSpec& s, std::mt19937_64& rng)
      : in_(s.in_channels), out_(s.out_channels),
        w_(detail::he_uniform<T>({s.out_channels, s.in_channels}, s.in_channels, rng)),
        b_(Tensor<T>({s.out_channels})) {
    if (!in_ || !out_) throw ArgumentError("dense: sizes must be positive");
  }
  LayerKind kind() const override { return LayerKind::dense; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dense>(*this); }
  void clear_cache() override { x_ = Tensor<T>(); }

  Param<T>& weight() { return w_; }
  Param<T>& bias() { return b_; }

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    if (x.rank() < 2 || x.item_size() != in_)
      throw ShapeError("dense: expected items of " + std::to_string(in_) + " values, got " +
                       shape_str(x.shape()));
    const std::size_t n = x.dim(0);
    Tensor<T> y({n, out_});
    detail::MatMap<T> ym(y.data(), n, out_);
    ym.noalias() = detail::CMatMap<T>(x.data(), n, in_) *
                   detail::CMatMap<T>(w_.value.data(), out_, in_).transpose();
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t o = 0; o < out_; ++o) ym(b, o) += b_.value[o];
    x_ = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    detail::require_cache(!x_.empty(), "dense");
    const std::size_t n = x_.dim(0);
    detail::require_same(g.shape(), {n, out_}, "dense");
    Tensor<T> gx(x_.shape());
    detail::CMatMap<T> gm(g.data(), n, out_);
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t o = 0; o < out_; ++o) b_.grad[o] += gm(b, o);
    detail::MatMap<T>(w_.grad.data(), out_, in_).noalias() +=
        gm.transpose() * detail::CMatMap<T>(x_.data(), n, in_);
    detail::MatMap<T>(gx.data(), n, in_).noalias() =
        gm * detail::CMatMap<T>(w_.value.data(), out_, in_);
    return gx;
  }

  void collect_params(const std::string& p, std::vector<NamedParam<T>>& out) override {
    out.push_back({p + "weight", &w_});
    out.push_back({p + "bias", &b_});
  }

 private:
  std::size_t in_, out_;
  Param<T> w_, b_;
  Tensor<T> x_;
};

/// Per-channel batch normalization over batch and spatial axes of (N, C, ...).
/// Train mode normalizes with batch statistics and updates the running
/// estimates; eval mode uses the running estimates only.
template <class T>
class BatchNorm final : public Layer<T> {
 public:
  explicit BatchNorm(const LayerSpec& s)
      : c_(s.in_channels), momentum_(s.momentum), eps_(s.eps),
        gamma_(Tensor<T>({s.in_channels}, T{1})), beta_(Tensor<T>({s.in_channels})),
        running_mean_({s.in_channels}, T{0}), running_var_({s.in_channels}, T{1}) {
    if (!c_) throw ArgumentError("batchnorm: channels must be positive");
  }
  LayerKind kind() const override { return LayerKind::batchnorm; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<BatchNorm>(*this); }
  void clear_cache() override {
    xhat_ = Tensor<T>();
    inv_std_.clear();
  }

  Tensor<T>& running_mean() { return running_mean_; }
  Tensor<T>& running_var() { return running_var_; }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    if (x.rank() < 2 || x.dim(1) != c_)
      throw ShapeError("batchnorm: expected " + std::to_string(c_) + " channels, got " +
                       shape_str(x.shape()));
    const std::size_t n = x.dim(0), sp = x.item_size() / c_, m = n * sp;
    Tensor<T> y(x.shape());
    xhat_ = Tensor<T>(x.shape());
    inv_std_.assign(c_, T{0});
    for (std::size_t c = 0; c < c_; ++c) {
      double mean = 0.0, var = 0.0;
      if (mode == Mode::train) {
        for (std::size_t b = 0; b < n; ++b) {
          const T* xi = x.data() + (b * c_ + c) * sp;
          for (std::size_t i = 0; i < sp; ++i) mean += xi[i];
        }
        mean /= static_cast<double>(m);
        for (std::size_t b = 0; b < n; ++b) {
          const T* xi = x.data() + (b * c_ + c) * sp;
          for (std::size_t i = 0; i < sp; ++i) {
            const double d = xi[i] - mean;
            var += d * d;
          }
        }
        var /= static_cast<double>(m);
        running_mean_[c] = static_cast<T>(momentum_ * running_mean_[c] + (1.0 - momentum_) * mean);
        running_var_[c] = static_cast<T>(momentum_ * running_var_[c] + (1.0 - momentum_) * var);
      } else {
        mean = running_mean_[c];
        var = running_var_[c];
      }
      const T inv = static_cast<T>(1.0 / std::sqrt(var + eps_));
      inv_std_[c] = inv;
      const T g = gamma_.value[c], bt = beta_.value[c], mu = static_cast<T>(mean);
      for (std::size_t b = 0; b < n; ++b) {
        const std::size_t off = (b * c_ + c) * sp;
        for (std::size_t i = 0; i < sp; ++i) {
          const T xh = (x[off + i] - mu) * inv;
          xhat_[off + i] = xh;
          y[off + i] = g * xh + bt;
        }
      }
    }
    mode_ = mode;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    detail::require_cache(!xhat_.empty(), "batchnorm");
    detail::require_same(g.shape(), xhat_.shape(), "batchnorm");
    const std::size_t n = g.dim(0), sp = g.item_size() / c_;
    const T m = static_cast<T>(n * sp);
    Tensor<T> gx(g.shape());
    for (std::size_t c = 0; c < c_; ++c) {
      T sum_g = 0, sum_gx = 0;
      for (std::size_t b = 0; b < n; ++b) {
        const std::size_t off = (b * c_ + c) * sp;
        for (std::size_t i = 0; i < sp; ++i) {
          sum_g += g[off + i];
          sum_gx += g[off + i] * xhat_[off + i];
        }
      }
      gamma_.grad[c] += sum_gx;
      beta_.grad[c] += sum_g;
      const T scale = gamma_.value[c] * inv_std_[c];
      for (std::size_t b = 0; b < n; ++b) {
        const std::size_t off = (b * c_ + c) * sp;
        for (std::size_t i = 0; i < sp; ++i) {
          if (mode_ == Mode::train)
            gx[off + i] = scale * (g[off + i] - sum_g / m - xhat_[off + i] * sum_gx / m);
          else
            gx[off + i] = scale * g[off + i];
        }
      }
    }
    return gx;
  }

  void collect_params(const std::string& p, std::vector<NamedParam<T>>& out) override {
    out.push_back({p + "gamma", &gamma_});
    out.push_back({p + "beta", &beta_});
  }
  void collect_buffers(const std::string& p, std::vector<NamedBuffer<T>>& out) override {
    out.push_back({p + "running_mean", &running_mean_});
    out.push_back({p + "running_var", &running_var_});
  }

 private:
  std::size_t c_;
  double momentum_, eps_;
  Param<T> gamma_, beta_;
  Tensor<T> running_mean_, running_var_;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
  Mode mode_ = Mode::train;
};

/// max(x, slope * x); slope 0 is a plain ReLU.
template <class T>
class LeakyRelu final : public Layer<T> {
 public:
  explicit LeakyRelu(double slope, LayerKind k) : slope_(static_cast<T>(slope)), kind_(k) {}
  LayerKind kind() const override { return kind_; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<LeakyRelu>(*this); }
  void clear_cache() override { x_ = Tensor<T>(); }

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : slope_ * x[i];
    x_ = x;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    detail::require_cache(!x_.empty(), kind_name(kind_));
    detail::require_same(g.shape(), x_.shape(), kind_name(kind_));
    Tensor<T> gx(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] = x_[i] > T{0} ? g[i] : slope_ * g[i];
    return gx;
  }

 private:
  T slope_;
  LayerKind kind_;
  Tensor<T> x_;
};

template <class T>
class Sigmoid final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::sigmoid; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Sigmoid>(*this); }
  void clear_cache() override { y_ = Tensor<T>(); }

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
      // Split by sign so exp never overflows.
      if (x[i] >= T{0}) {
        y[i] = T{1} / (T{1} + std::exp(-x[i]));
      } else {
        const T e = std::exp(x[i]);
        y[i] = e / (T{1} + e);
      }
    }
    y_ = y;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    detail::require_cache(!y_.empty(), "sigmoid");
    detail::require_same(g.shape(), y_.shape(), "sigmoid");
    Tensor<T> gx(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * y_[i] * (T{1} - y_[i]);
    return gx;
  }

 private:
  Tensor<T> y_;
};

/// Nearest-neighbour 2x upsampling of (N, C, H, W).
template <class T>
class Upsample2x final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::upsample2x; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Upsample2x>(*this); }
  void clear_cache() override { in_shape_.clear(); }

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    detail::require_rank(x.shape(), 4, "upsample2x");
    const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor<T> y({x.dim(0), x.dim(1), 2 * h, 2 * w});
    for (std::size_t p = 0; p < planes; ++p) {
      const T* src = x.data() + p * h * w;
      T* dst = y.data() + p * 4 * h * w;
      for (std::size_t r = 0; r < 2 * h; ++r)
        for (std::size_t c = 0; c < 2 * w; ++c) dst[r * 2 * w + c] = src[(r / 2) * w + c / 2];
    }
    in_shape_ = x.shape();
    return y;
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    detail::require_cache(!in_shape_.empty(), "upsample2x");
    const std::size_t planes = in_shape_[0] * in_shape_[1], h = in_shape_[2], w = in_shape_[3];
    detail::require_same(g.shape(), {in_shape_[0], in_shape_[1], 2 * h, 2 * w}, "upsample2x");
    Tensor<T> gx(in_shape_);
    for (std::size_t p = 0; p < planes; ++p) {
      const T* src = g.data() + p * 4 * h * w;
      T* dst = gx.data() + p * h * w;
      for (std::size_t r = 0; r < 2 * h; ++r)
        for (std::size_t c = 0; c < 2 * w; ++c) dst[(r / 2) * w + c / 2] += src[r * 2 * w + c];
    }
    return gx;
  }

 private:
  std::vector<std::size_t> in_shape_;
};

/// (N, F, L) -> (N, F): maximum over the sequence axis.
template <class T>
class MaxOverTime final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::max_over_time; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<MaxOverTime>(*this); }
  void clear_cache() override {
    in_shape_.clear();
    arg_.clear();
  }

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    detail::require_rank(x.shape(), 3, "max_over_time");
    const std::size_t rows = x.dim(0) * x.dim(1), len = x.dim(2);
    if (!len) throw ShapeError("max_over_time: empty sequence");
    Tensor<T> y({x.dim(0), x.dim(1)});
    arg_.assign(rows, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      const T* xi = x.data() + r * len;
      std::size_t best = 0;
      for (std::size_t t = 1; t < len; ++t)
        if (xi[t] > xi[best]) best = t;
      arg_[r] = best;
      y[r] = xi[best];
    }
    in_shape_ = x.shape();
    return y;
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    detail::require_cache(!in_shape_.empty(), "max_over_time");
    detail::require_same(g.shape(), {in_shape_[0], in_shape_[1]}, "max_over_time");
    Tensor<T> gx(in_shape_);
    const std::size_t len = in_shape_[2];
    for (std::size_t r = 0; r < arg_.size(); ++r) gx[r * len + arg_[r]] = g[r];
    return gx;
  }

 private:
  std::vector<std::size_t> in_shape_;
  std::vector<std::size_t> arg_;
};

/// Zeroes each element with probability p and scales survivors by 1/(1-p).
template <class T>
Tensor<T> dropout_apply(const Tensor<T>& x, double p, std::mt19937_64& rng,
                        std::vector<T>* mask_out = nullptr) {
  if (!(p >= 0.0 && p < 1.0)) throw ArgumentError("dropout: rate must lie in [0, 1)");
  Tensor<T> y = x;
  if (mask_out) mask_out->assign(x.size(), T{1});
  if (p == 0.0) return y;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const T keep = static_cast<T>(1.0 / (1.0 - p));
  for (std::size_t i = 0; i < y.size(); ++i) {
    const T m = u(rng) < p ? T{0} : keep;
    y[i] *= m;
    if (mask_out) (*mask_out)[i] = m;
  }
  return y;
}

/// Inverted dropout; active in train mode, or in any mode when forced.
template <class T>
class Dropout final : public Layer<T> {
 public:
  Dropout(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ArgumentError("dropout: rate must lie in [0, 1)");
  }
  LayerKind kind() const override { return LayerKind::dropout; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dropout>(*this); }
  void clear_cache() override { mask_.clear(); }

  void set_forced(bool on) { forced_ = on; }
  void reseed(std::uint64_t seed) { rng_.seed(seed); }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    if (mode == Mode::train || forced_) return dropout_apply(x, rate_, rng_, &mask_);
    mask_.assign(x.size(), T{1});
    return x;
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    detail::require_cache(!mask_.empty() || g.empty(), "dropout");
    if (g.size() != mask_.size()) throw ShapeError("dropout: gradient size mismatch");
    Tensor<T> gx = g;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= mask_[i];
    return gx;
  }

 private:
  double rate_;
  std::mt19937_64 rng_;
  bool forced_ = false;
  std::vector<T> mask_;
};

/// Reinterprets each item with a new shape.
template <class T>
class Reshape final : public Layer<T> {
 public:
  explicit Reshape(std::vector<std::size_t> target) : target_(std::move(target)) {}
  LayerKind kind() const override { return LayerKind::reshape; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Reshape>(*this); }
  void clear_cache() override { in_shape_.clear(); }

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    if (x.rank() < 1 || x.item_size() != shape_count(target_))
      throw ShapeError("reshape: cannot map " + shape_str(x.shape()) + " to items " +
                       shape_str(target_));
    std::vector<std::size_t> s{x.dim(0)};
    s.insert(s.end(), target_.begin(), target_.end());
    in_shape_ = x.shape();
    return x.reshaped(std::move(s));
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    detail::require_cache(!in_shape_.empty(), "reshape");
    return g.reshaped(in_shape_);
  }

 private:
  std::vector<std::size_t> target_;
  std::vector<std::size_t> in_shape_;
};

/// Multiplies by a fixed constant.
template <class T>
class Scale final : public Layer<T> {
 public:
  explicit Scale(double factor) : factor_(static_cast<T>(factor)) {}
  LayerKind kind() const override { return LayerKind::scale; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Scale>(*this); }
  void clear_cache() override { cached_ = false; }

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    Tensor<T> y = x;
    for (auto& v : y.storage()) v *= factor_;
    cached_ = true;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    detail::require_cache(cached_, "scale");
    Tensor<T> gx = g;
    for (auto& v : gx.storage()) v *= factor_;
    return gx;
  }

 private:
  T factor_;
  bool cached_ = false;
};

}  // namespace lact::nn
