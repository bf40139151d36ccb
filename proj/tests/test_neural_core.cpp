#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "lact/nn/adam.hpp"
#include "lact/nn/gradcheck.hpp"
#include "lact/nn/network.hpp"

using namespace lact;
using namespace lact::nn;
using Catch::Approx;

namespace {

Tensor<double> randn(std::vector<std::size_t> shape, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.storage()) v = nd(rng);
  return t;
}

double check_layer(const LayerSpec& spec, std::vector<std::size_t> in_shape, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  Network<double> net({spec}, rng);
  // Random biases and batchnorm affine terms so that zero-initialized
  // parameters are exercised away from their starting point.
  std::mt19937_64 prng(seed + 100);
  std::normal_distribution<double> nd(0.0, 0.3);
  for (auto& p : net.params())
    for (auto& v : p.param->value.storage()) v += nd(prng);
  GradCheckOptions opt;
  opt.seed = seed;
  return grad_check(net, randn(std::move(in_shape), seed + 7), opt);
}

}  // namespace

TEST_CASE("conv2d matches a nested-loop oracle", "[nn]") {
  for (auto [stride, pad] : {std::pair<std::size_t, std::size_t>{1, 1}, {2, 0}, {2, 3}, {1, 0}}) {
    const std::size_t k = 3, in = 2, out = 3, h = 5, w = 5;
    std::mt19937_64 rng(3);
    Conv2d<double> conv(LayerSpec::conv2d(in, out, k, stride, pad), rng);
    for (std::size_t i = 0; i < conv.weight().value.size(); ++i)
      conv.weight().value[i] = static_cast<double>(i % 7) - 3.0;
    conv.bias().value[1] = 0.5;
    Tensor<double> x({1, in, h, w});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i % 11) * 0.25;
    const auto y = conv.forward(x, Mode::eval);
    const std::size_t ho = (h + 2 * pad - k) / stride + 1;
    REQUIRE(y.dim(2) == ho);
    for (std::size_t f = 0; f < out; ++f)
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < ho; ++ox) {
          double acc = conv.bias().value[f];
          for (std::size_t c = 0; c < in; ++c)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long iy = long(oy * stride + ky) - long(pad), ix = long(ox * stride + kx) - long(pad);
                if (iy < 0 || ix < 0 || iy >= long(h) || ix >= long(w)) continue;
                acc += conv.weight().value[((f * in + c) * k + ky) * k + kx] * x[(c * h + iy) * w + ix];
              }
          CHECK(y[(f * ho + oy) * ho + ox] == Approx(acc).margin(1e-12));
        }
  }
}

TEST_CASE("conv1d matches a nested-loop oracle", "[nn]") {
  std::mt19937_64 rng(2);
  Conv1d<double> conv(LayerSpec::conv1d(4, 3, 3), rng);
  const auto x = randn({2, 4, 9}, 5);
  const auto y = conv.forward(x, Mode::eval);
  REQUIRE(y.shape() == std::vector<std::size_t>{2, 3, 7});
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t f = 0; f < 3; ++f)
      for (std::size_t t = 0; t < 7; ++t) {
        double acc = conv.bias().value[f];
        for (std::size_t c = 0; c < 4; ++c)
          for (std::size_t k = 0; k < 3; ++k) acc += conv.weight().value[(f * 4 + c) * 3 + k] * x[(b * 4 + c) * 9 + t + k];
        CHECK(y[(b * 3 + f) * 7 + t] == Approx(acc).margin(1e-12));
      }
  CHECK_THROWS_AS(conv.forward(randn({1, 4, 2}, 1), Mode::eval), ShapeError);
}

TEST_CASE("identity dense layer and relu basics", "[nn]") {
  std::mt19937_64 rng(0);
  Dense<double> d(LayerSpec::dense(4, 4), rng);
  d.weight().value.fill(0.0);
  for (std::size_t i = 0; i < 4; ++i) d.weight().value[i * 4 + i] = 1.0;
  const auto x = randn({3, 4}, 9);
  CHECK(d.forward(x, Mode::eval) == x);

  Network<double> r({LayerSpec::relu()}, rng);
  Tensor<double> neg({2, 5}, -1.5);
  const auto zero = r.forward(neg, Mode::eval);
  for (double v : zero.values()) CHECK(v == 0.0);
}

TEST_CASE("dense gradient matches the least-squares closed form", "[nn]") {
  std::mt19937_64 rng(4);
  Dense<double> d(LayerSpec::dense(3, 2), rng);
  const std::size_t n = 5;
  const auto x = randn({n, 3}, 1), y = randn({n, 2}, 2);
  const auto p = d.forward(x, Mode::train);
  Tensor<double> g({n, 2});
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * (p[i] - y[i]) / double(n);
  d.backward(g);
  // dL/dW[o][i] = 2/n sum_b (x_b W^T - y_b)[o] x_b[i], biases are zero at init.
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t i = 0; i < 3; ++i) {
      double acc = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        double pred = 0.0;
        for (std::size_t j = 0; j < 3; ++j) pred += d.weight().value[o * 3 + j] * x[b * 3 + j];
        acc += 2.0 * (pred - y[b * 2 + o]) * x[b * 3 + i] / double(n);
      }
      CHECK(d.weight().grad[o * 3 + i] == Approx(acc).margin(1e-12));
    }
}

TEST_CASE("every layer passes an isolated finite-difference check", "[nn][gradcheck]") {
  CHECK(check_layer(LayerSpec::conv1d(5, 4, 3), {2, 5, 8}) < 1e-4);
  CHECK(check_layer(LayerSpec::conv2d(3, 4, 3, 1, 1), {2, 3, 6, 6}) < 1e-4);
  CHECK(check_layer(LayerSpec::conv2d(2, 3, 7, 2, 3), {2, 2, 9, 9}) < 1e-4);
  CHECK(check_layer(LayerSpec::dense(7, 5), {3, 7}) < 1e-4);
  CHECK(check_layer(LayerSpec::batchnorm(3), {4, 3, 3, 3}) < 1e-4);
  CHECK(check_layer(LayerSpec::batchnorm(4), {5, 4}) < 1e-4);
  CHECK(check_layer(LayerSpec::relu(), {3, 10}) < 1e-4);
  CHECK(check_layer(LayerSpec::leaky_relu(0.2), {3, 10}) < 1e-4);
  CHECK(check_layer(LayerSpec::sigmoid(), {3, 10}) < 1e-4);
  CHECK(check_layer(LayerSpec::upsample2x(), {2, 2, 3, 4}) < 1e-4);
  CHECK(check_layer(LayerSpec::residual_block(3), {2, 3, 5, 5}) < 1e-4);
  CHECK(check_layer(LayerSpec::max_over_time(), {2, 4, 7}) < 1e-4);
  CHECK(check_layer(LayerSpec::dropout(0.0), {2, 6}) < 1e-4);
  CHECK(check_layer(LayerSpec::reshape({2, 3}), {2, 6}) < 1e-4);
  CHECK(check_layer(LayerSpec::scale(0.05), {2, 6}) < 1e-4);
}

TEST_CASE("linear stack checks to near machine precision", "[nn][gradcheck]") {
  std::mt19937_64 rng(8);
  Network<double> net({LayerSpec::dense(6, 4), LayerSpec::dense(4, 3)}, rng);
  CHECK(grad_check(net, randn({3, 6}, 3)) < 1e-7);
}

TEST_CASE("zero output gradient gives zero parameter gradients", "[nn]") {
  std::mt19937_64 rng(1);
  Network<double> net({LayerSpec::conv2d(1, 2, 3, 1, 1), LayerSpec::batchnorm(2), LayerSpec::relu(),
                       LayerSpec::residual_block(2)},
                      rng);
  const auto y = net.forward(randn({2, 1, 4, 4}, 1), Mode::train);
  net.zero_grad();
  net.backward(Tensor<double>(y.shape()));
  for (auto& p : net.params())
    for (double v : p.param->grad.values()) CHECK(v == 0.0);
}

TEST_CASE("backward without forward and shape errors are reported", "[nn]") {
  std::mt19937_64 rng(1);
  Network<double> net({LayerSpec::dense(4, 3), LayerSpec::dense(5, 2)}, rng);
  CHECK_THROWS_AS(net.backward(Tensor<double>({1, 2})), MissingCacheError);
  try {
    net.forward(randn({1, 4}, 1), Mode::eval);
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
  }
}

TEST_CASE("initialization statistics", "[nn]") {
  std::mt19937_64 rng(12);
  Conv2d<double> conv(LayerSpec::conv2d(64, 64, 3, 1, 1), rng);
  double s = 0.0, s2 = 0.0;
  const auto& w = conv.weight().value;
  for (double v : w.values()) {
    s += v;
    s2 += v * v;
  }
  const double n = double(w.size());
  CHECK(std::abs(s / n) < 0.01 * std::sqrt(2.0 / 576.0) * 10.0);
  CHECK(std::sqrt(s2 / n - (s / n) * (s / n)) == Approx(std::sqrt(2.0 / 576.0)).epsilon(0.03));
  for (double v : conv.bias().value.values()) CHECK(v == 0.0);

  Network<double> bn({LayerSpec::batchnorm(3)}, rng);
  auto params = bn.params();
  REQUIRE(params.size() == 2);
  for (double v : params[0].param->value.values()) CHECK(v == 1.0);
  for (double v : params[1].param->value.values()) CHECK(v == 0.0);
}

TEST_CASE("batchnorm eval output ignores batch composition", "[nn]") {
  std::mt19937_64 rng(5);
  Network<double> net({LayerSpec::batchnorm(2)}, rng);
  for (int i = 0; i < 5; ++i) net.forward(randn({8, 2, 3, 3}, 40 + i, 2.0), Mode::train);
  const auto a = randn({1, 2, 3, 3}, 1);
  auto batch = randn({4, 2, 3, 3}, 2, 5.0);
  std::copy(a.storage().begin(), a.storage().end(), batch.storage().begin());
  const auto ya = net.forward(a, Mode::eval);
  const auto yb = net.forward(batch, Mode::eval);
  for (std::size_t i = 0; i < ya.size(); ++i) CHECK(ya[i] == yb[i]);
  CHECK(net.forward(a, Mode::eval) == ya);
}

TEST_CASE("adam arithmetic", "[nn][adam]") {
  Param<double> p(Tensor<double>({3}, 0.5));
  std::vector<NamedParam<double>> ps{{"p", &p}};
  AdamState<double> st;
  adam_step(ps, st);
  for (double v : p.value.values()) CHECK(v == 0.5);
  CHECK(st.step == 1);

  AdamState<double> fresh;
  p.grad.fill(1.0);
  adam_step(ps, fresh);
  CHECK(p.value[0] - 0.5 == Approx(-1e-3 / (1.0 + 1e-8)).epsilon(1e-12));

  AdamState<double> many;
  Param<double> q(Tensor<double>({1}, 0.0));
  std::vector<NamedParam<double>> qs{{"q", &q}};
  q.grad.fill(-3.0);
  double prev = 0.0, delta = 0.0;
  for (int i = 0; i < 500; ++i) {
    adam_step(qs, many);
    delta = q.value[0] - prev;
    prev = q.value[0];
  }
  CHECK(delta == Approx(1e-3).epsilon(1e-6));
}

TEST_CASE("inverted dropout statistics", "[nn][dropout]") {
  std::mt19937_64 rng(99);
  Tensor<double> one({1'000'000}, 1.0);
  CHECK(dropout_apply(one, 0.0, rng) == one);
  const auto y = dropout_apply(one, 0.05, rng);
  std::size_t zeros = 0;
  double mean = 0.0;
  for (double v : y.values()) {
    zeros += v == 0.0;
    mean += v;
  }
  CHECK(std::abs(double(zeros) / 1e6 - 0.05) < 0.001);
  CHECK(mean / 1e6 == Approx(1.0).epsilon(0.01));
  for (double v : y.values()) CHECK((v == 0.0 || v == Approx(1.0 / 0.95)));

  std::mt19937_64 r1(3), r2(3);
  CHECK(dropout_apply(one, 0.3, r1) == dropout_apply(one, 0.3, r2));
  CHECK_THROWS_AS(dropout_apply(one, 1.0, r1), ArgumentError);
}

TEST_CASE("dropout layer is identity in eval mode unless forced", "[nn][dropout]") {
  Dropout<double> d(0.5, 1);
  const auto x = randn({4, 8}, 1);
  CHECK(d.forward(x, Mode::eval) == x);
  d.set_forced(true);
  CHECK_FALSE(d.forward(x, Mode::eval) == x);
}
