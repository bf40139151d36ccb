#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "lact/error.hpp"
#include "lact/image.hpp"
#include "lact/nn/adam.hpp"
#include "lact/nn/layers.hpp"
#include "lact/nn/network.hpp"
#include "lact/nn/tensor.hpp"
#include "lact/phantom.hpp"
#include "lact/projector.hpp"

namespace lact {

/// Multi-window 1D CNN over the view axis. Detector bins are input channels;
/// each window size yields `filters` max-pooled features.
struct EncoderConfig {
  std::vector<std::size_t> window_sizes{1, 2, 3, 4, 5};
  std::size_t filters = 64;
  std::size_t n_bins = 93;

  std::size_t embedding_dim() const { return filters * window_sizes.size(); }
  std::size_t max_window() const {
    return window_sizes.empty() ? 0 : *std::max_element(window_sizes.begin(), window_sizes.end());
  }
};

/// Dense projection to a base_side^2 x base_channels grid, then one stage per
/// entry of stage_channels: upsample x2, 3x3 conv, batchnorm, relu, residual
/// units. A final 3x3 conv to one channel with relu, times the fixed
/// output_scale (the typical attenuation of a pixel), gives the image.
struct DecoderConfig {
  std::size_t latent_dim = 320;
  std::size_t base_side = 8;
  std::size_t base_channels = 64;
  std::vector<std::size_t> stage_channels{32, 16, 16};
  std::size_t residual_units = 1;
  double output_scale = 0.05;

  std::size_t out_side() const { return base_side << stage_channels.size(); }
};

/// Two strided conv stages with batchnorm + leaky relu, dense to `hidden`,
/// dense to 1, sigmoid.
struct DiscriminatorConfig {
  std::size_t side = 64;
  std::vector<std::size_t> channels{64, 32};
  std::size_t kernel = 7;
  std::size_t stride = 2;
  std::size_t hidden = 16;
  double slope = 0.2;
};

enum class LossMode { mse, adversarial };

inline const char* loss_mode_name(LossMode m) { return m == LossMode::mse ? "mse" : "adversarial"; }

struct TrainConfig {
  LossMode mode = LossMode::mse;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double lambda = 0.05;
  std::size_t batch_size = 16;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;

  static TrainConfig for_mode(LossMode m) {
    TrainConfig c;
    c.mode = m;
    if (m == LossMode::adversarial) {
      c.lr = 2e-4;
      c.beta1 = 0.5;
    }
    return c;
  }
};

inline void validate(const TrainConfig& c) {
  if (!(c.lr >= 0.0)) throw ArgumentError("train: lr must be non-negative");
  if (!(c.lambda >= 0.0)) throw ArgumentError("train: lambda must be non-negative");
  if (c.batch_size == 0) throw ArgumentError("train: batch_size must be positive");
}

struct CtNetConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  DiscriminatorConfig discriminator;
  TrainConfig train;

  /// 64x64 slices from 93-bin sinograms, 320-dimensional latent.
  static CtNetConfig desk() { return CtNetConfig{}; }

  /// Tiny network for finite-difference checks: 6 bins, 8x8 output.
  static CtNetConfig reduced() {
    CtNetConfig c;
    c.encoder = {{1, 2, 3}, 3, 6};
    c.decoder = {9, 2, 4, {3, 2}, 1, 1.0};
    c.discriminator = {8, {3, 2}, 3, 2, 4, 0.2};
    return c;
  }
};

inline void validate(const CtNetConfig& c) {
  if (c.encoder.window_sizes.empty() || c.encoder.filters == 0 || c.encoder.n_bins == 0)
    throw ArgumentError("ctnet: encoder needs windows, filters and bins");
  if (c.decoder.latent_dim != c.encoder.embedding_dim())
    throw ArgumentError("ctnet: decoder latent_dim " + std::to_string(c.decoder.latent_dim) +
                        " != encoder embedding " + std::to_string(c.encoder.embedding_dim()));
  if (c.discriminator.side != c.decoder.out_side())
    throw ArgumentError("ctnet: discriminator side must equal decoder output side");
  if (c.discriminator.channels.size() != 2)
    throw ArgumentError("ctnet: discriminator has exactly two conv stages");
}

/// Fixed-length code of a limited-angle sinogram.
struct LatentEmbedding {
  std::vector<double> values;
};

namespace detail {

inline std::size_t conv_out(std::size_t side, std::size_t k, std::size_t stride, std::size_t pad) {
  return (side + 2 * pad - k) / stride + 1;
}

inline std::vector<nn::LayerSpec> decoder_specs(const DecoderConfig& d) {
  using nn::LayerSpec;
  std::vector<LayerSpec> s;
  s.push_back(LayerSpec::dense(d.latent_dim, d.base_channels * d.base_side * d.base_side));
  s.push_back(LayerSpec::reshape({d.base_channels, d.base_side, d.base_side}));
  s.push_back(LayerSpec::batchnorm(d.base_channels));
  s.push_back(LayerSpec::relu());
  std::size_t ch = d.base_channels;
  for (std::size_t out : d.stage_channels) {
    s.push_back(LayerSpec::upsample2x());
    s.push_back(LayerSpec::conv2d(ch, out, 3, 1, 1));
    s.push_back(LayerSpec::batchnorm(out));
    s.push_back(LayerSpec::relu());
    for (std::size_t r = 0; r < d.residual_units; ++r) s.push_back(LayerSpec::residual_block(out));
    ch = out;
  }
  s.push_back(LayerSpec::conv2d(ch, 1, 3, 1, 1));
  s.push_back(LayerSpec::relu());
  s.push_back(LayerSpec::scale(d.output_scale));
  return s;
}

inline std::vector<nn::LayerSpec> discriminator_specs(const DiscriminatorConfig& d) {
  using nn::LayerSpec;
  const std::size_t pad = d.kernel / 2;
  const std::size_t s1 = conv_out(d.side, d.kernel, d.stride, pad);
  const std::size_t s2 = conv_out(s1, d.kernel, d.stride, pad);
  return {LayerSpec::conv2d(1, d.channels[0], d.kernel, d.stride, pad),
          LayerSpec::batchnorm(d.channels[0]),
          LayerSpec::leaky_relu(d.slope),
          LayerSpec::conv2d(d.channels[0], d.channels[1], d.kernel, d.stride, pad),
          LayerSpec::batchnorm(d.channels[1]),
          LayerSpec::leaky_relu(d.slope),
          LayerSpec::dense(d.channels[1] * s2 * s2, d.hidden),
          LayerSpec::batchnorm(d.hidden),
          LayerSpec::leaky_relu(d.slope),
          LayerSpec::dense(d.hidden, 1),
          LayerSpec::sigmoid()};
}

}  // namespace detail

/// Packs sinograms as (N, n_bins, n_views): bins are channels, views the sequence.
template <class T>
nn::Tensor<T> sinogram_batch(const std::vector<const Sinogram*>& sinos) {
  if (sinos.empty()) throw ShapeError("sinogram_batch: empty batch");
  const std::size_t v = sinos.front()->n_views(), b = sinos.front()->n_bins();
  nn::Tensor<T> x({sinos.size(), b, v});
  for (std::size_t n = 0; n < sinos.size(); ++n) {
    const Sinogram& s = *sinos[n];
    if (s.n_views() != v || s.n_bins() != b) throw ShapeError("sinogram_batch: sinogram sizes differ");
    T* dst = x.data() + n * b * v;
    for (std::size_t i = 0; i < v; ++i)
      for (std::size_t j = 0; j < b; ++j) dst[j * v + i] = static_cast<T>(s.at(i, j));
  }
  return x;
}

/// Packs images as (N, 1, ny, nx).
template <class T>
nn::Tensor<T> image_batch(const std::vector<const SliceImage*>& imgs) {
  if (imgs.empty()) throw ShapeError("image_batch: empty batch");
  const std::size_t nx = imgs.front()->nx(), ny = imgs.front()->ny();
  nn::Tensor<T> x({imgs.size(), 1, ny, nx});
  for (std::size_t n = 0; n < imgs.size(); ++n) {
    if (!imgs[n]->same_shape(*imgs.front())) throw ShapeError("image_batch: image sizes differ");
    std::transform(imgs[n]->storage().begin(), imgs[n]->storage().end(), x.data() + n * nx * ny,
                   [](double v) { return static_cast<T>(v); });
  }
  return x;
}

template <class T>
SliceImage image_from_batch(const nn::Tensor<T>& t, std::size_t n) {
  if (t.rank() != 4 || t.dim(1) != 1) throw ShapeError("image_from_batch: expected (N, 1, H, W)");
  const std::size_t h = t.dim(2), w = t.dim(3);
  std::vector<double> v(t.data() + n * h * w, t.data() + (n + 1) * h * w);
  return SliceImage(w, h, std::move(v));
}

/// Encoder, decoder and discriminator parameters with their optimizer state.
template <class T>
class CtNet {
 public:
  explicit CtNet(const CtNetConfig& cfg, std::uint64_t init_seed = 0) : cfg_(cfg) {
    validate(cfg_);
    std::mt19937_64 rng(init_seed);
    for (std::size_t f : cfg_.encoder.window_sizes) {
      branches_.emplace_back(std::vector<nn::LayerSpec>{nn::LayerSpec::conv1d(cfg_.encoder.n_bins,
                                                                              cfg_.encoder.filters, f),
                                                        nn::LayerSpec::relu(),
                                                        nn::LayerSpec::max_over_time()},
                             rng);
    }
    decoder_ = nn::Network<T>(detail::decoder_specs(cfg_.decoder), rng);
    disc_ = nn::Network<T>(detail::discriminator_specs(cfg_.discriminator), rng);
  }

  const CtNetConfig& config() const { return cfg_; }
  CtNetConfig& config() { return cfg_; }
  std::size_t image_side() const { return cfg_.decoder.out_side(); }

  /// (N, n_bins, n_views) -> (N, filters * windows).
  nn::Tensor<T> encode_batch(const nn::Tensor<T>& x, nn::Mode mode) {
    if (x.rank() != 3 || x.dim(1) != cfg_.encoder.n_bins)
      throw ShapeError("encode: expected (N, " + std::to_string(cfg_.encoder.n_bins) +
                       ", views), got " + nn::shape_str(x.shape()));
    if (x.dim(2) < cfg_.encoder.max_window())
      throw ShapeError("encode: " + std::to_string(x.dim(2)) + " views is fewer than the largest window " +
                       std::to_string(cfg_.encoder.max_window()));
    const std::size_t n = x.dim(0), f = cfg_.encoder.filters, h = branches_.size();
    nn::Tensor<T> z({n, f * h});
    for (std::size_t k = 0; k < h; ++k) {
      const nn::Tensor<T> y = branches_[k].forward(x, mode);
      for (std::size_t b = 0; b < n; ++b)
        std::copy(y.data() + b * f, y.data() + (b + 1) * f, z.data() + b * f * h + k * f);
    }
    input_shape_ = x.shape();
    return z;
  }

  nn::Tensor<T> encode_backward(const nn::Tensor<T>& g) {
    const std::size_t f = cfg_.encoder.filters, h = branches_.size();
    if (input_shape_.empty()) throw nn::MissingCacheError("encode: backward without forward");
    const std::size_t n = input_shape_[0];
    if (g.shape() != std::vector<std::size_t>{n, f * h}) throw ShapeError("encode: gradient shape mismatch");
    nn::Tensor<T> gx(input_shape_);
    for (std::size_t k = 0; k < h; ++k) {
      nn::Tensor<T> gk({n, f});
      for (std::size_t b = 0; b < n; ++b)
        std::copy(g.data() + b * f * h + k * f, g.data() + b * f * h + (k + 1) * f, gk.data() + b * f);
      const nn::Tensor<T> gi = branches_[k].backward(gk);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gi[i];
    }
    return gx;
  }

  /// (N, latent) -> (N, 1, side, side).
  nn::Tensor<T> decode_batch(const nn::Tensor<T>& z, nn::Mode mode) {
    if (z.rank() != 2 || z.dim(1) != cfg_.decoder.latent_dim)
      throw ShapeError("decode: expected latent of dimension " + std::to_string(cfg_.decoder.latent_dim) +
                       ", got " + nn::shape_str(z.shape()));
    return decoder_.forward(z, mode);
  }
  nn::Tensor<T> decode_backward(const nn::Tensor<T>& g) { return decoder_.backward(g); }

  nn::Tensor<T> generate_batch(const nn::Tensor<T>& x, nn::Mode mode) {
    return decode_batch(encode_batch(x, mode), mode);
  }
  nn::Tensor<T> generate_backward(const nn::Tensor<T>& g) { return encode_backward(decode_backward(g)); }

  /// (N, 1, side, side) -> (N, 1) probabilities.
  nn::Tensor<T> discriminate_batch(const nn::Tensor<T>& img, nn::Mode mode) {
    const std::size_t s = cfg_.discriminator.side;
    if (img.rank() != 4 || img.dim(1) != 1 || img.dim(2) != s || img.dim(3) != s)
      throw ShapeError("discriminate: expected (N, 1, " + std::to_string(s) + ", " + std::to_string(s) +
                       "), got " + nn::shape_str(img.shape()));
    return disc_.forward(img, mode);
  }
  nn::Tensor<T> discriminate_backward(const nn::Tensor<T>& g) { return disc_.backward(g); }

  std::vector<nn::NamedParam<T>> generator_params() {
    std::vector<nn::NamedParam<T>> out;
    for (std::size_t k = 0; k < branches_.size(); ++k)
      branches_[k].collect_params("encoder." + std::to_string(k) + ".", out);
    decoder_.collect_params("decoder.", out);
    return out;
  }
  std::vector<nn::NamedParam<T>> discriminator_params() { return disc_.params("discriminator."); }
  std::vector<nn::NamedParam<T>> all_params() {
    auto out = generator_params();
    auto d = discriminator_params();
    out.insert(out.end(), d.begin(), d.end());
    return out;
  }
  std::vector<nn::NamedBuffer<T>> buffers() {
    std::vector<nn::NamedBuffer<T>> out;
    decoder_.collect_buffers("decoder.", out);
    disc_.collect_buffers("discriminator.", out);
    return out;
  }

  void zero_generator_grad() {
    for (auto& p : generator_params()) p.param->grad.fill(T{0});
  }
  void zero_discriminator_grad() { disc_.zero_grad(); }

  nn::Network<T>& decoder() { return decoder_; }
  nn::Network<T>& discriminator() { return disc_; }
  nn::Network<T>& encoder_branch(std::size_t k) { return branches_.at(k); }

  LatentEmbedding encode(const Sinogram& s) {
    check_bins(s);
    const auto z = encode_batch(sinogram_batch<T>({&s}), nn::Mode::eval);
    return {std::vector<double>(z.storage().begin(), z.storage().end())};
  }

  SliceImage decode(const LatentEmbedding& z) {
    nn::Tensor<T> t({1, z.values.size()});
    std::transform(z.values.begin(), z.values.end(), t.data(), [](double v) { return static_cast<T>(v); });
    return image_from_batch(decode_batch(t, nn::Mode::eval), 0);
  }

  double discriminate(const SliceImage& img) {
    return static_cast<double>(discriminate_batch(image_batch<T>({&img}), nn::Mode::eval)[0]);
  }

  /// decode(encode(sinogram)) in eval mode.
  SliceImage predict(const Sinogram& s) {
    check_bins(s);
    return image_from_batch(generate_batch(sinogram_batch<T>({&s}), nn::Mode::eval), 0);
  }

  nn::AdamState<T> generator_opt;
  nn::AdamState<T> discriminator_opt;
  std::uint64_t epochs_done = 0;

 private:
  void check_bins(const Sinogram& s) const {
    if (s.n_bins() != cfg_.encoder.n_bins)
      throw ShapeError("ctnet: sinogram has " + std::to_string(s.n_bins()) + " bins, model expects " +
                       std::to_string(cfg_.encoder.n_bins));
  }

  CtNetConfig cfg_;
  std::vector<nn::Network<T>> branches_;
  nn::Network<T> decoder_;
  nn::Network<T> disc_;
  std::vector<std::size_t> input_shape_;
};

// Losses --------------------------------------------------------------------

inline constexpr double kProbClamp = 1e-7;

inline double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

/// Mean over the batch of the per-item squared L2 distance.
template <class T>
double mse_loss(const nn::Tensor<T>& pred, const nn::Tensor<T>& truth) {
  if (pred.shape() != truth.shape()) throw ShapeError("mse_loss: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(truth[i]);
    s += d * d;
  }
  return s / static_cast<double>(pred.dim(0));
}

/// Gradient of mse_loss with respect to pred.
template <class T>
nn::Tensor<T> mse_grad(const nn::Tensor<T>& pred, const nn::Tensor<T>& truth) {
  nn::Tensor<T> g(pred.shape());
  const T scale = static_cast<T>(2.0 / static_cast<double>(pred.dim(0)));
  for (std::size_t i = 0; i < pred.size(); ++i) g[i] = scale * (pred[i] - truth[i]);
  return g;
}

/// -log D(fake), D clamped away from 0 and 1.
inline double adversarial_loss(double d_fake) { return -std::log(clamp_prob(d_fake)); }

/// -log D(real) - log(1 - D(fake)).
inline double discriminator_loss(double d_real, double d_fake) {
  return -std::log(clamp_prob(d_real)) - std::log(1.0 - clamp_prob(d_fake));
}

inline double total_loss(double mse, double adv, double lambda) { return mse + lambda * adv; }

struct Losses {
  double mse = 0.0;
  double adv = 0.0;
  double d = 0.0;
  double total = 0.0;
};

/// Batch losses for predictions and targets of shape (N, 1, s, s); the
/// discriminator runs in eval mode. In mse mode lambda is treated as zero.
template <class T>
Losses compute_losses(const nn::Tensor<T>& pred, const nn::Tensor<T>& truth, CtNet<T>& model,
                      LossMode mode, double lambda) {
  Losses l;
  l.mse = mse_loss(pred, truth);
  const auto d_fake = model.discriminate_batch(pred, nn::Mode::eval);
  const auto d_real = model.discriminate_batch(truth, nn::Mode::eval);
  const double n = static_cast<double>(pred.dim(0));
  for (std::size_t i = 0; i < d_fake.size(); ++i) {
    l.adv += adversarial_loss(d_fake[i]) / n;
    l.d += discriminator_loss(d_real[i], d_fake[i]) / n;
  }
  l.total = total_loss(l.mse, l.adv, mode == LossMode::mse ? 0.0 : lambda);
  return l;
}

// Training ------------------------------------------------------------------

/// Limited-angle input and its ground-truth slice.
struct TrainSample {
  Sinogram limited;
  SliceImage truth;
};

struct EpochMetrics {
  std::size_t batches = 0;
  double mean_mse = 0.0;
  double mean_adv = 0.0;
  double mean_d = 0.0;
  double mean_total = 0.0;
  double first_batch_mse = 0.0;
  double mean_grad_norm = 0.0;
  /// Fraction of correct real/fake calls in the discriminator step.
  double disc_accuracy = 0.0;
  std::vector<double> batch_mse;
  std::vector<double> batch_disc_accuracy;
};

/// Builds training pairs from full-view samples by keeping views [0, limited_views).
inline std::vector<TrainSample> make_train_samples(const std::vector<SamplePair>& pairs,
                                                   std::size_t limited_views) {
  std::vector<TrainSample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (limited_views == 0 || limited_views > p.sinogram.n_views())
      throw GeometryError("make_train_samples: limited view count out of range");
    out.push_back({restrict_views(p.sinogram, {0, limited_views - 1}), p.image});
  }
  return out;
}

/// One pass over `data` in a seeded shuffled order. Adversarial mode takes one
/// discriminator step and then one generator step per batch.
template <class T>
EpochMetrics train_epoch(const std::vector<TrainSample>& data, CtNet<T>& model, const TrainConfig& cfg) {
  validate(cfg);
  EpochMetrics m;
  if (data.empty()) return m;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(cfg.seed, model.epochs_done));
  std::shuffle(order.begin(), order.end(), rng);

  auto set_opt = [&](nn::AdamState<T>& st) {
    st.lr = cfg.lr;
    st.beta1 = cfg.beta1;
    st.beta2 = cfg.beta2;
    st.eps = cfg.adam_eps;
  };
  set_opt(model.generator_opt);
  set_opt(model.discriminator_opt);
  auto gen_params = model.generator_params();
  auto disc_params = model.discriminator_params();
  const bool adversarial = cfg.mode == LossMode::adversarial;

  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const std::size_t end = std::min(order.size(), start + cfg.batch_size);
    std::vector<const Sinogram*> sinos;
    std::vector<const SliceImage*> imgs;
    for (std::size_t i = start; i < end; ++i) {
      sinos.push_back(&data[order[i]].limited);
      imgs.push_back(&data[order[i]].truth);
    }
    const auto x = sinogram_batch<T>(sinos);
    const auto y = image_batch<T>(imgs);
    const double n = static_cast<double>(end - start);
    const std::size_t batch_index = m.batches;

    model.zero_generator_grad();
    const auto pred = model.generate_batch(x, nn::Mode::train);
    const double mse = mse_loss(pred, y);
    auto g = mse_grad(pred, y);
    double adv = 0.0, dl = 0.0, acc = 0.0;

    if (adversarial) {
      model.zero_discriminator_grad();
      const auto d_real = model.discriminate_batch(y, nn::Mode::train);
      nn::Tensor<T> gr(d_real.shape());
      for (std::size_t i = 0; i < d_real.size(); ++i) {
        gr[i] = static_cast<T>(-1.0 / (n * clamp_prob(d_real[i])));
        acc += d_real[i] > T(0.5) ? 1.0 : 0.0;
      }
      model.discriminate_backward(gr);
      const auto d_fake = model.discriminate_batch(pred, nn::Mode::train);
      nn::Tensor<T> gf(d_fake.shape());
      for (std::size_t i = 0; i < d_fake.size(); ++i) {
        gf[i] = static_cast<T>(1.0 / (n * (1.0 - clamp_prob(d_fake[i]))));
        acc += d_fake[i] < T(0.5) ? 1.0 : 0.0;
        dl += discriminator_loss(d_real[i], d_fake[i]) / n;
      }
      model.discriminate_backward(gf);
      nn::adam_step(disc_params, model.discriminator_opt);
      acc /= 2.0 * n;

      const auto d_gen = model.discriminate_batch(pred, nn::Mode::train);
      nn::Tensor<T> ga(d_gen.shape());
      for (std::size_t i = 0; i < d_gen.size(); ++i) {
        ga[i] = static_cast<T>(-cfg.lambda / (n * clamp_prob(d_gen[i])));
        adv += adversarial_loss(d_gen[i]) / n;
      }
      const auto gpred = model.discriminate_backward(ga);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += gpred[i];
    }

    const double total = total_loss(mse, adv, adversarial ? cfg.lambda : 0.0);
    if (!std::isfinite(total) || !std::isfinite(dl))
      throw NumericError("train_epoch: non-finite loss at batch " + std::to_string(batch_index));

    model.generate_backward(g);
    m.mean_grad_norm += nn::grad_norm(gen_params);
    nn::adam_step(gen_params, model.generator_opt);

    if (m.batches == 0) m.first_batch_mse = mse;
    m.batch_mse.push_back(mse);
    m.batch_disc_accuracy.push_back(acc);
    m.mean_mse += mse;
    m.mean_adv += adv;
    m.mean_d += dl;
    m.mean_total += total;
    m.disc_accuracy += acc;
    ++m.batches;
  }
  const double b = static_cast<double>(m.batches);
  m.mean_mse /= b;
  m.mean_adv /= b;
  m.mean_d /= b;
  m.mean_total /= b;
  m.mean_grad_norm /= b;
  m.disc_accuracy /= b;
  ++model.epochs_done;
  return m;
}

}  // namespace lact
