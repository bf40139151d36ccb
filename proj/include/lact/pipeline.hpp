#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "lact/ctnet.hpp"
#include "lact/error.hpp"
#include "lact/fbp.hpp"
#include "lact/geometry.hpp"
#include "lact/image.hpp"
#include "lact/phantom.hpp"
#include "lact/projector.hpp"
#include "lact/wls.hpp"

namespace lact {

enum class ReconMethod { fbp, wls };

inline const char* method_name(ReconMethod m) { return m == ReconMethod::fbp ? "fbp" : "wls"; }

inline ReconMethod parse_method(const std::string& s) {
  if (s == "fbp") return ReconMethod::fbp;
  if (s == "wls") return ReconMethod::wls;
  throw ArgumentError("unknown reconstruction method '" + s + "' (expected fbp or wls)");
}

/// Anything that maps a limited sinogram to an image estimate.
template <class P>
concept Predictor = requires(P& p, const Sinogram& s) {
  { p.predict(s) } -> std::convertible_to<SliceImage>;
};

struct CompletionResult {
  Sinogram completed;
  SliceImage predicted;
  SliceImage final_image;
  ReconMethod method = ReconMethod::fbp;
};

/// Throws unless `limited` samples exactly the first views of `full`.
inline void require_view_prefix(const ParallelGeometry& limited, const ParallelGeometry& full) {
  const bool ok = limited.n_views <= full.n_views && limited.n_bins == full.n_bins &&
                  limited.angle_start_deg == full.angle_start_deg &&
                  limited.angle_step_deg == full.angle_step_deg && limited.bin_spacing == full.bin_spacing &&
                  limited.detector_center == full.detector_center;
  if (!ok)
    throw GeometryError("completion: limited geometry (" + std::to_string(limited.n_views) + " views from " +
                        std::to_string(limited.angle_start_deg) + " deg, step " +
                        std::to_string(limited.angle_step_deg) + ") is not a view prefix of the full geometry (" +
                        std::to_string(full.n_views) + " views from " + std::to_string(full.angle_start_deg) +
                        " deg, step " + std::to_string(full.angle_step_deg) + ")");
}

/// Measured rows verbatim, remaining rows from `filler` (a full-geometry sinogram).
inline Sinogram splice(const Sinogram& limited, const Sinogram& filler) {
  require_view_prefix(limited.geometry(), filler.geometry());
  Sinogram out = filler;
  for (std::size_t v = 0; v < limited.n_views(); ++v) {
    const auto src = limited.row(v);
    std::copy(src.begin(), src.end(), out.row(v).begin());
  }
  return out;
}

/// The limited sinogram with zeros in the missing views.
inline Sinogram zero_fill(const Sinogram& limited, const ParallelGeometry& full) {
  return splice(limited, Sinogram(full));
}

/// Stage one and two: project the predicted image over `full` and splice.
inline CompletionResult complete_with(const Sinogram& limited, const SliceImage& predicted,
                                      const ParallelGeometry& full) {
  require_view_prefix(limited.geometry(), full);
  Sinogram proj = forward_project(predicted, full);
  return {splice(limited, proj), predicted, SliceImage(predicted.nx(), predicted.ny()), ReconMethod::fbp};
}

template <Predictor P>
CompletionResult complete_sinogram(const Sinogram& limited, P& model, const ParallelGeometry& full) {
  require_view_prefix(limited.geometry(), full);
  return complete_with(limited, model.predict(limited), full);
}

inline SliceImage run_method(const Sinogram& s, std::size_t nx, std::size_t ny, ReconMethod m,
                             const WlsConfig& wls = {}) {
  if (m == ReconMethod::fbp) return fbp_reconstruct(s, nx, ny);
  WlsConfig c = wls;
  c.record_history = false;
  return wls_reconstruct(s, nx, ny, c).image;
}

template <Predictor P>
CompletionResult reconstruct(const Sinogram& limited, P& model, ReconMethod method, const ParallelGeometry& full,
                             const WlsConfig& wls = {}) {
  CompletionResult r = complete_sinogram(limited, model, full);
  r.final_image = run_method(r.completed, r.predicted.nx(), r.predicted.ny(), method, wls);
  r.method = method;
  return r;
}

/// Returns a fixed image regardless of input; used for oracle runs.
struct FixedPredictor {
  SliceImage image;
  SliceImage predict(const Sinogram&) const { return image; }
};

// Confidence ----------------------------------------------------------------

struct ConfidenceReport {
  SliceImage variance;
  /// exp(-sum(V) / ||Y_k||_2); meaningful only when !degenerate.
  double score = 1.0;
  std::size_t samples = 0;
  double dropout = 0.0;
  /// The unperturbed prediction has zero norm, so the score is undefined.
  bool degenerate = false;
};

inline double confidence_score(const SliceImage& variance, const SliceImage& prediction, bool* degenerate = nullptr) {
  const double nrm = norm2(prediction.values());
  double total = 0.0;
  for (double v : variance.values()) total += v;
  if (degenerate) *degenerate = nrm == 0.0;
  if (nrm == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::exp(-total / nrm);
}

/// K decodes of the latent under independent dropout masks (sample i uses
/// the stream derive_seed(seed, i)); V is the population variance per pixel.
/// p = 0 is accepted and gives the unperturbed limit.
template <class T>
ConfidenceReport confidence(const Sinogram& limited, CtNet<T>& model, std::size_t samples, double p,
                            std::uint64_t seed) {
  if (samples < 2) throw ArgumentError("confidence: need at least 2 samples");
  if (!(p >= 0.0 && p < 1.0)) throw ArgumentError("confidence: dropout must lie in [0, 1)");
  const LatentEmbedding z = model.encode(limited);
  const SliceImage base = model.decode(z);
  nn::Tensor<T> zt({1, z.values.size()});
  for (std::size_t i = 0; i < z.values.size(); ++i) zt[i] = static_cast<T>(z.values[i]);

  const std::size_t npx = base.size();
  std::vector<double> mean(npx, 0.0), m2(npx, 0.0);
  for (std::size_t k = 0; k < samples; ++k) {
    std::mt19937_64 rng(derive_seed(seed, k));
    const auto zk = nn::dropout_apply(zt, p, rng);
    const auto y = model.decode_batch(zk, nn::Mode::eval);
    // Welford update, fixed sample order.
    const double cnt = static_cast<double>(k + 1);
    for (std::size_t i = 0; i < npx; ++i) {
      const double v = static_cast<double>(y[i]);
      const double d = v - mean[i];
      mean[i] += d / cnt;
      m2[i] += d * (v - mean[i]);
    }
  }
  ConfidenceReport r;
  std::vector<double> var(npx);
  for (std::size_t i = 0; i < npx; ++i) var[i] = std::max(0.0, m2[i] / static_cast<double>(samples));
  r.variance = SliceImage(base.nx(), base.ny(), std::move(var));
  r.score = confidence_score(r.variance, base, &r.degenerate);
  r.samples = samples;
  r.dropout = p;
  return r;
}

}  // namespace lact
