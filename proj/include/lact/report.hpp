#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lact/ctnet.hpp"
#include "lact/fbp.hpp"
#include "lact/metrics.hpp"
#include "lact/phantom.hpp"
#include "lact/pipeline.hpp"
#include "lact/projector.hpp"
#include "lact/stats.hpp"
#include "lact/wls.hpp"

namespace lact {

/// Scores of every method on one held-out phantom.
struct PhantomRecord {
  double psnr_limited_fbp = 0.0;
  double psnr_limited_wls = 0.0;
  double psnr_predicted = 0.0;
  double psnr_completed_fbp = 0.0;
  double psnr_completed_wls = 0.0;
  double ssim_limited_fbp = 0.0;
  double ssim_limited_wls = 0.0;
  double ssim_predicted = 0.0;
  double ssim_completed_fbp = 0.0;
  double ssim_completed_wls = 0.0;
  double s_psnr_limited_fbp = 0.0;
  double s_psnr_completed_wls = 0.0;
  /// Sinogram-space PSNR of the spliced and the zero-filled sinograms.
  double sino_psnr_completed = 0.0;
  double sino_psnr_zero_filled = 0.0;
  double confidence = 0.0;
  bool confidence_degenerate = false;
};

struct ReportOptions {
  std::size_t limited_views = 90;
  std::size_t confidence_samples = 20;
  double confidence_dropout = 0.05;
  std::uint64_t seed = 0;
  WlsConfig wls{};
};

template <class T>
std::vector<PhantomRecord> evaluate_test_set(CtNet<T>& model, const std::vector<SamplePair>& test,
                                             const ReportOptions& opt) {
  std::vector<PhantomRecord> out;
  out.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& p = test[i];
    const ParallelGeometry& full = p.sinogram.geometry();
    const std::size_t nx = p.image.nx(), ny = p.image.ny();
    const Sinogram lim = restrict_views(p.sinogram, {0, opt.limited_views - 1});
    PhantomRecord r;
    const SliceImage lf = run_method(lim, nx, ny, ReconMethod::fbp, opt.wls);
    const SliceImage lw = run_method(lim, nx, ny, ReconMethod::wls, opt.wls);
    const CompletionResult c = complete_sinogram(lim, model, full);
    const SliceImage cf = run_method(c.completed, nx, ny, ReconMethod::fbp, opt.wls);
    const SliceImage cw = run_method(c.completed, nx, ny, ReconMethod::wls, opt.wls);
    r.psnr_limited_fbp = psnr(lf, p.image);
    r.psnr_limited_wls = psnr(lw, p.image);
    r.psnr_predicted = psnr(c.predicted, p.image);
    r.psnr_completed_fbp = psnr(cf, p.image);
    r.psnr_completed_wls = psnr(cw, p.image);
    r.ssim_limited_fbp = ssim(lf, p.image);
    r.ssim_limited_wls = ssim(lw, p.image);
    r.ssim_predicted = ssim(c.predicted, p.image);
    r.ssim_completed_fbp = ssim(cf, p.image);
    r.ssim_completed_wls = ssim(cw, p.image);
    r.s_psnr_limited_fbp = s_psnr(lf, p.sinogram);
    r.s_psnr_completed_wls = s_psnr(cw, p.sinogram);
    r.sino_psnr_completed = psnr_values(c.completed.values(), p.sinogram.values());
    r.sino_psnr_zero_filled = psnr_values(zero_fill(lim, full).values(), p.sinogram.values());
    const ConfidenceReport conf =
        confidence(lim, model, opt.confidence_samples, opt.confidence_dropout, derive_seed(opt.seed, i));
    r.confidence = conf.score;
    r.confidence_degenerate = conf.degenerate;
    out.push_back(r);
  }
  return out;
}

template <class F>
std::vector<double> column(const std::vector<PhantomRecord>& rs, F f) {
  std::vector<double> v;
  v.reserve(rs.size());
  for (const auto& r : rs) v.push_back(f(r));
  return v;
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// One "a beats b" comparison across the test set.
struct Ordering {
  std::string name;
  double mean_a = 0.0;
  double mean_b = 0.0;
  SignTest test;
  bool holds(double alpha = 0.05) const { return mean_a > mean_b && test.p_value < alpha; }
};

inline Ordering compare(std::string name, const std::vector<double>& a, const std::vector<double>& b) {
  return {std::move(name), mean_of(a), mean_of(b), sign_test(a, b)};
}

struct TestSetSummary {
  std::vector<Ordering> orderings;
  RankCorrelation confidence_vs_psnr;
};

/// The comparisons reported for a test set: completion+WLS over limited WLS
/// over limited FBP in PSNR, and spliced over zero-filled in sinogram PSNR.
inline TestSetSummary summarize(const std::vector<PhantomRecord>& rs) {
  TestSetSummary s;
  const auto cw = column(rs, [](const auto& r) { return r.psnr_completed_wls; });
  const auto cf = column(rs, [](const auto& r) { return r.psnr_completed_fbp; });
  const auto lw = column(rs, [](const auto& r) { return r.psnr_limited_wls; });
  const auto lf = column(rs, [](const auto& r) { return r.psnr_limited_fbp; });
  const auto pr = column(rs, [](const auto& r) { return r.psnr_predicted; });
  s.orderings.push_back(compare("psnr completed_wls > limited_wls", cw, lw));
  s.orderings.push_back(compare("psnr limited_wls > limited_fbp", lw, lf));
  s.orderings.push_back(compare("psnr completed_wls > limited_fbp", cw, lf));
  s.orderings.push_back(compare("psnr completed_wls >= completed_fbp", cw, cf));
  s.orderings.push_back(compare("psnr predicted > limited_fbp", pr, lf));
  s.orderings.push_back(compare("sino_psnr completed > zero_filled",
                                column(rs, [](const auto& r) { return r.sino_psnr_completed; }),
                                column(rs, [](const auto& r) { return r.sino_psnr_zero_filled; })));
  s.orderings.push_back(compare("s_psnr completed_wls > limited_fbp",
                                column(rs, [](const auto& r) { return r.s_psnr_completed_wls; }),
                                column(rs, [](const auto& r) { return r.s_psnr_limited_fbp; })));
  std::vector<double> conf, fin;
  for (const auto& r : rs)
    if (!r.confidence_degenerate) {
      conf.push_back(r.confidence);
      fin.push_back(r.psnr_completed_wls);
    }
  if (conf.size() >= 3) s.confidence_vs_psnr = spearman(conf, fin);
  return s;
}

}  // namespace lact
