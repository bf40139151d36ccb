#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "lact/error.hpp"
#include "lact/nn/layers.hpp"
#include "lact/nn/tensor.hpp"

namespace lact::nn {

template <class T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, std::mt19937_64& rng);

/// Ordered stack of layers built from LayerSpecs.
template <class T>
class Network {
 public:
  Network() = default;
  Network(std::vector<LayerSpec> specs, std::mt19937_64& rng) : specs_(std::move(specs)) {
    layers_.reserve(specs_.size());
    for (const auto& s : specs_) layers_.push_back(make_layer<T>(s, rng));
  }
  Network(const Network& o) : specs_(o.specs_) {
    layers_.reserve(o.layers_.size());
    for (const auto& l : o.layers_) layers_.push_back(l->clone());
  }
  Network& operator=(const Network& o) {
    if (this != &o) {
      Network tmp(o);
      *this = std::move(tmp);
    }
    return *this;
  }
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const std::vector<LayerSpec>& specs() const { return specs_; }
  std::size_t size() const { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    Tensor<T> h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      try {
        h = layers_[i]->forward(h, mode);
      } catch (const ShapeError& e) {
        throw ShapeError("layer " + std::to_string(i) + " (" + kind_name(layers_[i]->kind()) +
                         "): " + e.what());
      }
    }
    return h;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) {
    Tensor<T> g = grad_out;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      try {
        g = layers_[i]->backward(g);
      } catch (const ShapeError& e) {
        throw ShapeError("layer " + std::to_string(i) + " (" + kind_name(layers_[i]->kind()) +
                         "): " + e.what());
      }
    }
    return g;
  }

  void collect_params(const std::string& prefix, std::vector<NamedParam<T>>& out) {
    for (std::size_t i = 0; i < layers_.size(); ++i)
      layers_[i]->collect_params(prefix + std::to_string(i) + ".", out);
  }
  void collect_buffers(const std::string& prefix, std::vector<NamedBuffer<T>>& out) {
    for (std::size_t i = 0; i < layers_.size(); ++i)
      layers_[i]->collect_buffers(prefix + std::to_string(i) + ".", out);
  }
  std::vector<NamedParam<T>> params(const std::string& prefix = "") {
    std::vector<NamedParam<T>> out;
    collect_params(prefix, out);
    return out;
  }

  void zero_grad() {
    for (auto& p : params()) p.param->grad.fill(T{0});
  }
  void clear_cache() {
    for (auto& l : layers_) l->clear_cache();
  }

 private:
  std::vector<LayerSpec> specs_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// x + conv(relu(bn(conv(x)))) with 3x3 same-padded convolutions.
template <class T>
class ResidualBlock final : public Layer<T> {
 public:
  ResidualBlock(const LayerSpec& s, std::mt19937_64& rng)
      : body_({LayerSpec::conv2d(s.in_channels, s.in_channels, s.window, 1, s.padding),
               LayerSpec::batchnorm(s.in_channels), LayerSpec::relu(),
               LayerSpec::conv2d(s.in_channels, s.in_channels, s.window, 1, s.padding)},
              rng) {
    if (s.window != 2 * s.padding + 1)
      throw ArgumentError("residual_block: padding must preserve the spatial size");
  }
  LayerKind kind() const override { return LayerKind::residual_block; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ResidualBlock>(*this); }
  void clear_cache() override { body_.clear_cache(); }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    Tensor<T> y = body_.forward(x, mode);
    if (y.shape() != x.shape())
      throw ShapeError("residual_block: body changed shape " + shape_str(x.shape()) + " -> " +
                       shape_str(y.shape()));
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
    return y;
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> gx = body_.backward(g);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
    return gx;
  }
  void collect_params(const std::string& p, std::vector<NamedParam<T>>& out) override {
    body_.collect_params(p, out);
  }
  void collect_buffers(const std::string& p, std::vector<NamedBuffer<T>>& out) override {
    body_.collect_buffers(p, out);
  }

 private:
  Network<T> body_;
};

template <class T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, std::mt19937_64& rng) {
  switch (spec.kind) {
    case LayerKind::conv1d: return std::make_unique<Conv1d<T>>(spec, rng);
    case LayerKind::conv2d: return std::make_unique<Conv2d<T>>(spec, rng);
    case LayerKind::dense: return std::make_unique<Dense<T>>(spec, rng);
    case LayerKind::batchnorm: return std::make_unique<BatchNorm<T>>(spec);
    case LayerKind::relu: return std::make_unique<LeakyRelu<T>>(0.0, LayerKind::relu);
    case LayerKind::leaky_relu: return std::make_unique<LeakyRelu<T>>(spec.slope, LayerKind::leaky_relu);
    case LayerKind::sigmoid: return std::make_unique<Sigmoid<T>>();
    case LayerKind::upsample2x: return std::make_unique<Upsample2x<T>>();
    case LayerKind::residual_block: return std::make_unique<ResidualBlock<T>>(spec, rng);
    case LayerKind::max_over_time: return std::make_unique<MaxOverTime<T>>();
    case LayerKind::dropout: return std::make_unique<Dropout<T>>(spec.rate, rng());
    case LayerKind::reshape: return std::make_unique<Reshape<T>>(spec.target);
    case LayerKind::scale: return std::make_unique<Scale<T>>(spec.slope);
  }
  throw ArgumentError("make_layer: unknown layer kind");
}

/// Global L2 norm of all accumulated gradients.
template <class T>
double grad_norm(const std::vector<NamedParam<T>>& params) {
  double s = 0.0;
  for (const auto& p : params)
    for (T g : p.param->grad.storage()) s += static_cast<double>(g) * static_cast<double>(g);
  return std::sqrt(s);
}

}  // namespace lact::nn
