// Acceptance run: one PASS/FAIL line per criterion, then a summary.
// Exits 0 once every criterion was evaluated; --strict turns any FAIL into
// exit code 1.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lact/lact.hpp"
#include "lact/nn/gradcheck.hpp"

using namespace lact;
using Clock = std::chrono::steady_clock;
using Model = CtNet<float>;

namespace {

struct Outcome {
  bool pass = false;
  std::vector<std::string> notes;
};

std::string f(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

std::FILE* report_file = nullptr;

/// One line to stdout and, when open, to the report file.
void say(const std::string& line) {
  for (std::FILE* out : {stdout, report_file}) {
    if (!out) continue;
    std::fputs(line.c_str(), out);
    std::fputc('\n', out);
    std::fflush(out);
  }
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

SliceImage random_image(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  SliceImage img(n, n);
  for (auto& v : img.values()) v = nd(rng);
  return img;
}

// 1 -------------------------------------------------------------------------
Outcome adjoint() {
  const auto t0 = Clock::now();
  const auto g = make_geometry(90, 0.0, 1.0, 93);
  std::mt19937_64 rng(101);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const auto x = random_image(64, rng);
    Sinogram y(g);
    for (auto& v : y.values()) v = nd(rng);
    const auto ax = forward_project(x, g);
    const auto aty = back_project(y, 64, 64);
    const double lhs = dot(ax.values(), y.values()), rhs = dot(x.values(), aty.values());
    worst = std::max(worst, std::abs(lhs - rhs) / (norm2(ax.values()) * norm2(y.values())));
  }
  const double t = seconds_since(t0);
  return {worst < 1e-5 && t < 10.0, {f("max relative defect %.3e over 20 pairs (< 1e-5), %.2f s (< 10 s)", worst, t)}};
}

// 2 -------------------------------------------------------------------------
double clip_length(double t, double r, double x0, double x1, double y0, double y1) {
  const double c = std::cos(t), s = std::sin(t);
  const double px = r * c, py = r * s, dx = -s, dy = c;
  double lo = -1e300, hi = 1e300;
  auto slab = [&](double p, double d, double a, double b) {
    if (std::abs(d) < 1e-15) return p >= a && p <= b;
    double u0 = (a - p) / d, u1 = (b - p) / d;
    if (u0 > u1) std::swap(u0, u1);
    lo = std::max(lo, u0);
    hi = std::min(hi, u1);
    return true;
  };
  if (!slab(px, dx, x0, x1) || !slab(py, dy, y0, y1)) return 0.0;
  return std::max(0.0, hi - lo);
}

Outcome projector_oracle() {
  // Unit-density centered disk, area fractions from 64x64 samples per pixel.
  const double radius = 19.2;
  Shape disk;
  disk.half_u = disk.half_v = radius;
  disk.lac = 1.0;
  const auto img = rasterize({disk}, 64, 64, 64);
  const auto g = desk_full_geometry();
  const auto s = forward_project(img, g);
  double worst = 0.0, worst_inner = 0.0, worst_axis = 0.0;
  for (std::size_t v = 0; v < g.n_views; ++v)
    for (std::size_t b = 0; b < g.n_bins; ++b) {
      const double r = g.bin_position(b);
      if (std::abs(r) >= radius) continue;
      const double chord = 2.0 * std::sqrt(radius * radius - r * r);
      const double e = std::abs(s.at(v, b) - chord) / chord;
      worst = std::max(worst, e);
      if (std::abs(r) <= radius / 2) worst_inner = std::max(worst_inner, e);
      if (v == 0 || v == 90) worst_axis = std::max(worst_axis, e);
    }
  const bool disk_ok = worst < 1e-3;

  // Single pixel: the exact clipped length of every ray through its center
  // along directions where Joseph touches only that pixel.
  double px_worst = 0.0;
  {
    const auto g1 = make_geometry(180, 0.0, 1.0, 3, 0.25);
    const auto s1 = forward_project(SliceImage(1, 1, 1.0), g1);
    for (std::size_t v = 0; v < g1.n_views; ++v)
      px_worst = std::max(px_worst, std::abs(s1.at(v, 1) - clip_length(g1.angle_rad(v), 0.0, -0.5, 0.5, -0.5, 0.5)));
    SliceImage one(16, 16);
    one.at(5, 9) = 1.0;
    const double x = one.x_of(5), y = one.y_of(9);
    for (double deg : {0.0, 45.0, 90.0, 135.0}) {
      const double t = deg * std::numbers::pi / 180.0;
      const double r = x * std::cos(t) + y * std::sin(t);
      auto gp = make_geometry(1, deg, 1.0, 25, 1.0);
      gp.detector_center = 12.0 - r;
      const auto sp = forward_project(one, gp);
      px_worst = std::max(px_worst, std::abs(sp.at(0, 12) - clip_length(t, r, x - 0.5, x + 0.5, y - 0.5, y + 0.5)));
    }
  }
  const bool px_ok = px_worst < 1e-6;
  return {disk_ok && px_ok,
          {f("disk: max relative per-bin error %.3e over all views and bins (< 1e-3): %s", worst,
             disk_ok ? "ok" : "exceeds"),
           f("disk: axis views %.3e, central half of the detector %.3e", worst_axis, worst_inner),
           f("single pixel: max abs error %.3e vs line clipping (< 1e-6)", px_worst)}};
}

// 3 -------------------------------------------------------------------------
Outcome mass_consistency() {
  const auto d = gen_dataset(10, 303, desk_full_geometry(), 64, 64);
  double worst = 0.0;
  std::size_t bad = 0;
  for (const auto& p : d) {
    double lo = 1e300, hi = -1e300, mean = 0.0;
    for (std::size_t v = 0; v < p.sinogram.n_views(); ++v) {
      double m = 0.0;
      for (double x : p.sinogram.row(v)) m += x;
      lo = std::min(lo, m);
      hi = std::max(hi, m);
      mean += m;
    }
    mean /= double(p.sinogram.n_views());
    const double spread = (hi - lo) / mean;
    worst = std::max(worst, spread);
    bad += spread >= 0.01;
  }
  return {worst < 0.01, {f("max (max-min)/mean view mass %.4f%% (< 1%%), %zu of 10 phantoms over", 100 * worst, bad)}};
}

// 4 -------------------------------------------------------------------------
Outcome fbp_consistency() {
  const auto d = gen_dataset(10, 404, desk_full_geometry(), 64, 64);
  double min_full = 1e300;
  std::size_t worse = 0;
  for (const auto& p : d) {
    const double full = psnr(fbp_reconstruct(p.sinogram, 64, 64), p.image);
    const double lim = psnr(fbp_reconstruct(restrict_views(p.sinogram, {0, 89}), 64, 64), p.image);
    min_full = std::min(min_full, full);
    worse += lim < full;
  }
  return {min_full >= 28.0 && worse == 10,
          {f("min full-view FBP PSNR %.2f dB (>= 28), limited strictly worse on %zu/10", min_full, worse)}};
}

// 5 -------------------------------------------------------------------------
Outcome wls_correctness() {
  const auto t0 = Clock::now();
  const auto g = desk_full_geometry();
  const auto d = gen_dataset(10, 505, g, 64, 64);
  bool monotone = true;
  double res_full = 0.0, res_lim = 0.0;
  std::size_t max_iters = 0, wls_wins = 0;
  for (const auto& p : d) {
    const auto lim = restrict_views(p.sinogram, {0, 89});
    for (const Sinogram* s : {&p.sinogram, &lim}) {
      const auto r = wls_reconstruct(*s, 64, 64);
      for (std::size_t k = 1; k < r.residual_history.size(); ++k)
        monotone = monotone && r.residual_history[k] <= r.residual_history[k - 1];
      const auto ay = forward_project(r.image, s->geometry());
      double num = 0.0;
      for (std::size_t i = 0; i < ay.size(); ++i) num += std::pow(ay.storage()[i] - s->storage()[i], 2);
      double& worst = s == &p.sinogram ? res_full : res_lim;
      worst = std::max(worst, std::sqrt(num) / norm2(s->values()));
      max_iters = std::max(max_iters, r.iterations_used);
      if (s == &p.sinogram) wls_wins += psnr(r.image, p.image) >= psnr(fbp_reconstruct(*s, 64, 64), p.image);
    }
  }
  const double t = seconds_since(t0);
  const double worst_res = std::max(res_full, res_lim);
  return {monotone && worst_res < 1e-4 && max_iters <= 50 && wls_wins >= 9 && t < 60.0,
          {f("normal-residual histories monotone: %s", monotone ? "yes" : "no"),
           f("max data residual on consistent sinograms (< 1e-4): full-view %.3e, limited %.3e; max %zu iterations "
             "(<= 50)",
             res_full, res_lim, max_iters),
           f("full-view WLS >= FBP on %zu/10 (>= 9), %.1f s (< 60 s)", wls_wins, t)}};
}

// 6 -------------------------------------------------------------------------
double layer_check(const nn::LayerSpec& spec, std::vector<std::size_t> shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  nn::Network<double> net({spec}, rng);
  std::mt19937_64 prng(seed + 100);
  std::normal_distribution<double> nd(0.0, 0.3);
  for (auto& p : net.params())
    for (auto& v : p.param->value.storage()) v += nd(prng);
  nn::Tensor<double> x(std::move(shape));
  std::mt19937_64 xr(seed + 7);
  std::normal_distribution<double> xn;
  for (auto& v : x.storage()) v = xn(xr);
  nn::GradCheckOptions opt;
  opt.seed = seed;
  return nn::grad_check(net, x, opt);
}

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  CtNet<double> net(CtNetConfig::reduced(), 3);
  {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd(0.0, 0.2);
    for (auto& p : net.generator_params())
      if (p.name.ends_with("bias"))
        for (auto& v : p.param->value.storage()) v = nd(rng);
  }
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  nn::Tensor<double> x({3, 6, 8}), probe({3, 1, 8, 8});
  for (auto& v : x.storage()) v = nd(rng);
  for (auto& v : probe.storage()) v = nd(rng);
  auto loss = [&] {
    const auto y = net.generate_batch(x, nn::Mode::train);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * probe[i];
    return s;
  };
  net.zero_generator_grad();
  net.generate_batch(x, nn::Mode::train);
  net.generate_backward(probe);
  nn::GradCheckOptions opt;
  opt.coords = 100000;
  nn::GradCheckStats stats;
  const double full = nn::check_param_grads(net.generator_params(), loss, opt, &stats);

  using nn::LayerSpec;
  const std::vector<std::pair<LayerSpec, std::vector<std::size_t>>> layers{
      {LayerSpec::conv1d(5, 4, 3), {2, 5, 8}},       {LayerSpec::conv2d(3, 4, 3, 1, 1), {2, 3, 6, 6}},
      {LayerSpec::conv2d(2, 3, 7, 2, 3), {2, 2, 9, 9}}, {LayerSpec::dense(7, 5), {3, 7}},
      {LayerSpec::batchnorm(3), {4, 3, 3, 3}},       {LayerSpec::batchnorm(4), {5, 4}},
      {LayerSpec::relu(), {3, 10}},                  {LayerSpec::leaky_relu(0.2), {3, 10}},
      {LayerSpec::sigmoid(), {3, 10}},               {LayerSpec::upsample2x(), {2, 2, 3, 4}},
      {LayerSpec::residual_block(3), {2, 3, 5, 5}},  {LayerSpec::max_over_time(), {2, 4, 7}},
      {LayerSpec::dropout(0.0), {2, 6}},             {LayerSpec::reshape({2, 3}), {2, 6}},
      {LayerSpec::scale(0.05), {2, 6}}};
  double worst_layer = 0.0;
  for (std::size_t i = 0; i < layers.size(); ++i)
    worst_layer = std::max(worst_layer, layer_check(layers[i].first, layers[i].second, 1 + i));
  const double t = seconds_since(t0);
  return {full < 1e-3 && worst_layer < 1e-4 && t < 300.0,
          {f("reduced generator max relative error %.3e (< 1e-3) over %zu coordinates, %zu skipped at kinks", full,
             stats.checked, stats.kinks),
           f("worst isolated layer %.3e over %zu layer kinds (< 1e-4), %.1f s (< 300 s)", worst_layer, layers.size(),
             t)}};
}

// 7 -------------------------------------------------------------------------
Outcome training_progress() {
  const auto data = make_train_samples(gen_dataset(200, 707, desk_full_geometry(), 64, 64), 90);
  auto run = [&](std::vector<EpochMetrics>& log) {
    Model m(CtNetConfig::desk(), 7);
    auto tc = TrainConfig::for_mode(LossMode::mse);
    tc.seed = 7;
    for (int e = 0; e < 5; ++e) log.push_back(train_epoch(data, m, tc));
    return m;
  };
  std::vector<EpochMetrics> a, b;
  auto ma = run(a);
  auto mb = run(b);
  const double ratio = a[4].mean_mse / a[0].first_batch_mse;
  bool same = true;
  for (int e = 0; e < 5; ++e) same = same && a[e].mean_mse == b[e].mean_mse;
  const auto pa = ma.all_params(), pb = mb.all_params();
  for (std::size_t i = 0; i < pa.size(); ++i) same = same && pa[i].param->value.storage() == pb[i].param->value.storage();
  return {ratio < 0.5 && same,
          {f("first-batch loss %.4f, epoch-5 mean %.4f, ratio %.3f (< 0.5)", a[0].first_batch_mse, a[4].mean_mse, ratio),
           f("second seeded run bit-identical (losses and every parameter): %s", same ? "yes" : "no")}};
}

// Shared trained model ---------------------------------------------------------
struct Trained {
  Model model{CtNetConfig::desk(), 0};
  std::vector<SamplePair> test;
  std::vector<PhantomRecord> records;
  double train_seconds = 0.0;
  double eval_seconds = 0.0;
};

void train_main(Trained& t, std::size_t samples, std::size_t epochs) {
  const auto t0 = Clock::now();
  const auto g = desk_full_geometry();
  const auto data = make_train_samples(gen_dataset(samples, 1, g, 64, 64), 90);
  auto tc = TrainConfig::for_mode(LossMode::mse);
  tc.epochs = epochs;
  t.model.config().train = tc;
  for (std::size_t e = 0; e < epochs; ++e) {
    const auto m = train_epoch(data, t.model, tc);
    say(f("      epoch %zu mean_mse %.4f (%.0f s)", e + 1, m.mean_mse, seconds_since(t0)));
  }
  t.train_seconds = seconds_since(t0);
  const auto t1 = Clock::now();
  t.test = gen_dataset(50, 999, g, 64, 64);
  t.records = evaluate_test_set(t.model, t.test, ReportOptions{});
  t.eval_seconds = seconds_since(t1);
}

// 8 -------------------------------------------------------------------------
Outcome pipeline_ordering(const Trained& t) {
  const auto s = summarize(t.records);
  auto find = [&](const std::string& name) -> const Ordering& {
    for (const auto& o : s.orderings)
      if (o.name == name) return o;
    throw std::runtime_error("missing ordering " + name);
  };
  const auto& cw_lw = find("psnr completed_wls > limited_wls");
  const auto& lw_lf = find("psnr limited_wls > limited_fbp");
  const auto& cw_lf = find("psnr completed_wls > limited_fbp");
  const auto& sino = find("sino_psnr completed > zero_filled");
  const double total = t.train_seconds + t.eval_seconds;
  Outcome o;
  o.pass = cw_lw.holds() && lw_lf.holds() && cw_lf.holds() && sino.holds() && total < 7200.0;
  for (const auto* x : {&cw_lw, &lw_lf, &cw_lf, &sino})
    o.notes.push_back(f("%-36s means %.2f vs %.2f, wins %zu losses %zu, sign p %.2e", x->name.c_str(), x->mean_a,
                        x->mean_b, x->test.wins, x->test.losses, x->test.p_value));
  o.notes.push_back(f("mean predicted-image PSNR %.2f dB, completion+FBP %.2f dB",
                      mean_of(column(t.records, [](const auto& r) { return r.psnr_predicted; })),
                      mean_of(column(t.records, [](const auto& r) { return r.psnr_completed_fbp; }))));
  o.notes.push_back(f("training %.0f s + evaluation %.0f s (< 7200 s)", t.train_seconds, t.eval_seconds));
  return o;
}

// 9 -------------------------------------------------------------------------
Outcome oracle_completion(const Trained& t) {
  const auto g = desk_full_geometry();
  double worst = 0.0;
  for (const auto& p : t.test) {
    FixedPredictor oracle{p.image};
    const auto r = reconstruct(restrict_views(p.sinogram, {0, 89}), oracle, ReconMethod::wls, g);
    const double full = psnr(run_method(p.sinogram, 64, 64, ReconMethod::wls), p.image);
    worst = std::max(worst, std::abs(psnr(r.final_image, p.image) - full));
  }
  return {worst <= 0.5, {f("max |oracle pipeline - full-view WLS| %.3e dB over %zu phantoms (<= 0.5)", worst, t.test.size())}};
}

// 10 ------------------------------------------------------------------------
Outcome confidence_validity(Trained& t) {
  const auto s = summarize(t.records);
  std::size_t degenerate = 0;
  for (const auto& r : t.records) degenerate += r.confidence_degenerate;
  const auto off = confidence(restrict_views(t.test[0].sinogram, {0, 89}), t.model, 20, 0.0, 0);
  const bool unit = off.score == 1.0 && !off.degenerate;
  const auto& c = s.confidence_vs_psnr;
  return {c.rho > 0.0 && c.p_value < 0.05 && unit,
          {f("Spearman rho %.3f, p %.3e over %zu phantoms (%zu degenerate)", c.rho, c.p_value, c.n, degenerate),
           f("dropout disabled gives r_k = %.17g", off.score)}};
}

// 11 ------------------------------------------------------------------------
Outcome variable_views(Trained& t) {
  const auto g = desk_full_geometry();
  Outcome o;
  std::vector<double> means;
  for (std::size_t v : {90, 85, 80, 75, 70}) {
    double sum = 0.0;
    for (const auto& p : t.test)
      sum += psnr(reconstruct(restrict_views(p.sinogram, {0, v - 1}), t.model, ReconMethod::wls, g).final_image, p.image);
    means.push_back(sum / double(t.test.size()));
  }
  o.pass = true;
  for (std::size_t k = 1; k < means.size(); ++k) o.pass = o.pass && means[k] <= means[k - 1] + 0.3;
  o.notes.push_back(f("completion+WLS mean PSNR at 90/85/80/75/70 views: %.2f %.2f %.2f %.2f %.2f", means[0], means[1],
                      means[2], means[3], means[4]));
  return o;
}

// 12 ------------------------------------------------------------------------
Outcome segmentation_ordering(Trained& t) {
  const auto g = desk_full_geometry();
  Outcome o;
  double pipe_sum = 0.0, lim_sum = 0.0, full_min = 1.0;
  for (std::uint64_t k = 0; k < 3; ++k) {
    BagSpec spec;
    spec.seed = derive_seed(1212, k);
    const auto bag = gen_bag(spec, 64, 64, 32);
    std::vector<SliceImage> pipe, lim, full;
    for (std::size_t z = 0; z < 32; ++z) {
      const auto sino = forward_project(slice_of(bag.volume, z), g);
      const auto ls = restrict_views(sino, {0, 89});
      pipe.push_back(reconstruct(ls, t.model, ReconMethod::wls, g).final_image);
      lim.push_back(run_method(ls, 64, 64, ReconMethod::wls));
      full.push_back(run_method(sino, 64, 64, ReconMethod::wls));
    }
    const double dp = threshold_sweep(stack_slices(pipe), bag.labels).best_mean_dice;
    const double dl = threshold_sweep(stack_slices(lim), bag.labels).best_mean_dice;
    const double df = threshold_sweep(stack_slices(full), bag.labels).best_mean_dice;
    pipe_sum += dp;
    lim_sum += dl;
    full_min = std::min(full_min, df);
    o.notes.push_back(f("volume %llu (%d objects): Dice pipeline %.3f, limited WLS %.3f, full-view WLS %.3f",
                        static_cast<unsigned long long>(k), label_count(bag.labels), dp, dl, df));
  }
  o.pass = pipe_sum >= lim_sum && full_min >= 0.9;
  o.notes.push_back(f("mean over volumes: pipeline %.3f >= limited %.3f; min full-view %.3f (>= 0.9)", pipe_sum / 3,
                      lim_sum / 3, full_min));
  return o;
}

// 13 ------------------------------------------------------------------------
Outcome serialization(Trained& t) {
  const auto& p = t.test[0];
  BagSpec spec;
  spec.seed = 13;
  const auto bag = gen_bag(spec, 16, 16, 8);
  bool containers = true;
  for (const auto& c : {io::to_container(p.image), io::to_container(p.sinogram), io::to_container(bag.volume),
                        io::to_container(bag.labels)}) {
    const auto bytes = io::encode(c);
    const auto back = io::decode(bytes);
    containers = containers && back == c && io::encode(back) == bytes;
  }
  containers = containers && io::sinogram_of(io::decode(io::encode(io::to_container(p.sinogram)))) == p.sinogram;

  const auto bytes = io::encode_checkpoint(t.model);
  auto back = io::decode_checkpoint<float>(bytes);
  const bool ckpt = io::encode_checkpoint(back) == bytes;
  std::size_t equal = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    const auto lim = restrict_views(t.test[i].sinogram, {0, 89});
    equal += back.predict(lim) == t.model.predict(lim);
  }
  return {containers && ckpt && equal == 10,
          {f("container round trips bit-identical: %s; checkpoint re-encodes identically: %s", containers ? "yes" : "no",
             ckpt ? "yes" : "no"),
           f("reloaded predictions bit-equal on %zu/10 inputs (%zu-byte checkpoint)", equal, bytes.size())}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  bool strict = false;
  std::size_t samples = 6000, epochs = 30;
  app.add_flag("--strict", strict, "exit 1 when any criterion fails");
  app.add_option("--samples", samples, "training phantoms for the shared model")->capture_default_str();
  app.add_option("--epochs", epochs, "training epochs for the shared model")->capture_default_str();
  std::string report_path;
  app.add_option("--report", report_path, "also write every line to this file");
  CLI11_PARSE(app, argc, argv);
  if (!report_path.empty() && !(report_file = std::fopen(report_path.c_str(), "w"))) {
    std::fprintf(stderr, "cannot open %s\n", report_path.c_str());
    return 2;
  }

  std::vector<std::pair<int, std::string>> results;
  int passed = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, {std::string("exception: ") + e.what()}};
    }
    say(f("%s %2d %s (%.1f s)", o.pass ? "PASS" : "FAIL", id, name.c_str(), seconds_since(t0)));
    for (const auto& n : o.notes) say("      " + n);
    passed += o.pass;
  };

  report(1, "adjoint correctness", adjoint);
  report(2, "projector oracles", projector_oracle);
  report(3, "sinogram mass consistency", mass_consistency);
  report(4, "FBP self-consistency", fbp_consistency);
  report(5, "WLS correctness", wls_correctness);
  report(6, "gradient fidelity", gradient_fidelity);
  report(7, "training progress and determinism", training_progress);

  say(f("      training the shared model: %zu phantoms, %zu epochs", samples, epochs));
  Trained t;
  std::optional<std::string> train_error;
  try {
    train_main(t, samples, epochs);
  } catch (const std::exception& e) {
    train_error = e.what();
  }
  auto needs_model = [&](int id, const std::string& name, std::function<Outcome()> fn) {
    if (train_error) fn = [&] { return Outcome{false, {"training failed: " + *train_error}}; };
    report(id, name, fn);
  };
  needs_model(8, "pipeline ordering", [&] { return pipeline_ordering(t); });
  needs_model(9, "oracle-completion equivalence", [&] { return oracle_completion(t); });
  needs_model(10, "confidence validity", [&] { return confidence_validity(t); });
  needs_model(11, "variable-view robustness", [&] { return variable_views(t); });
  needs_model(12, "segmentation ordering", [&] { return segmentation_ordering(t); });
  needs_model(13, "serialization", [&] { return serialization(t); });

  say(f("summary: %d/13 criteria passed", passed));
  if (report_file) std::fclose(report_file);
  return strict && passed != 13 ? 1 : 0;
}
