#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <queue>
#include <tuple>
#include <vector>

#include "lact/error.hpp"
#include "lact/volume.hpp"

namespace lact {

struct GrowParams {
  /// A voxel joins a region when its intensity is at least this.
  double threshold = 0.01;
  /// Regions with fewer voxels are discarded (left as background).
  std::size_t min_region_size = 20;
};

inline void validate(const GrowParams& p) {
  if (!(p.threshold > 0.0)) throw ArgumentError("region_grow: threshold must be positive");
}

/// Seeds at the brightest unvisited voxel above threshold and floods over the
/// 6-neighbourhood. Ties in intensity go to the lower linear index.
inline LabelVolume region_grow(const Volume& volume, const GrowParams& params) {
  validate(params);
  const auto& g = volume.grid;
  const std::size_t nx = g.nx(), ny = g.ny(), nz = g.nz();
  LabelVolume labels(nx, ny, nz);
  for (double v : g.storage())
    if (!std::isfinite(v)) throw NumericError("region_grow: volume has non-finite voxels");

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g[i] >= params.threshold) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return g[a] > g[b]; });

  std::vector<char> seen(g.size(), 0);
  std::vector<std::size_t> region;
  std::int32_t next = 1;
  for (std::size_t seed : order) {
    if (seen[seed]) continue;
    region.clear();
    std::queue<std::size_t> q;
    q.push(seed);
    seen[seed] = 1;
    while (!q.empty()) {
      const std::size_t i = q.front();
      q.pop();
      region.push_back(i);
      const std::size_t x = i % nx, y = (i / nx) % ny, z = i / (nx * ny);
      auto visit = [&](std::size_t j) {
        if (!seen[j] && g[j] >= params.threshold) {
          seen[j] = 1;
          q.push(j);
        }
      };
      if (x > 0) visit(i - 1);
      if (x + 1 < nx) visit(i + 1);
      if (y > 0) visit(i - nx);
      if (y + 1 < ny) visit(i + nx);
      if (z > 0) visit(i - nx * ny);
      if (z + 1 < nz) visit(i + nx * ny);
    }
    if (region.size() < params.min_region_size) continue;
    for (std::size_t i : region) labels[i] = next;
    ++next;
  }
  return labels;
}

inline std::int32_t label_count(const LabelVolume& l) {
  std::int32_t m = 0;
  for (auto v : l.storage()) m = std::max(m, v);
  return m;
}

struct DiceReport {
  /// One score per truth label 1..L (index 0 is label 1); unmatched truth scores 0.
  std::vector<double> per_region;
  double mean = 0.0;
};

/// Greedy matching: repeatedly pair the unmatched (prediction, truth) labels
/// with the largest overlap. With no truth regions the mean is 1 for an empty
/// prediction and 0 otherwise.
inline DiceReport dice(const LabelVolume& labels, const LabelVolume& truth) {
  if (!labels.same_shape(truth)) throw ShapeError("dice: label volumes differ in shape");
  const std::int32_t np = label_count(labels), nt = label_count(truth);
  std::vector<std::size_t> size_p(static_cast<std::size_t>(np) + 1, 0), size_truth(static_cast<std::size_t>(nt) + 1, 0);
  std::map<std::pair<std::int32_t, std::int32_t>, std::size_t> overlap;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto a = labels[i], b = truth[i];
    if (a < 0 || b < 0) throw ArgumentError("dice: negative label");
    ++size_p[static_cast<std::size_t>(a)];
    ++size_truth[static_cast<std::size_t>(b)];
    if (a > 0 && b > 0) ++overlap[{a, b}];
  }
  std::vector<std::tuple<std::size_t, std::int32_t, std::int32_t>> pairs;
  for (const auto& [k, n] : overlap) pairs.emplace_back(n, k.first, k.second);
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const auto& x, const auto& y) { return std::get<0>(x) > std::get<0>(y); });

  DiceReport r;
  r.per_region.assign(static_cast<std::size_t>(nt), 0.0);
  std::vector<char> used_p(static_cast<std::size_t>(np) + 1, 0), used_t(static_cast<std::size_t>(nt) + 1, 0);
  for (const auto& [n, a, b] : pairs) {
    if (used_p[static_cast<std::size_t>(a)] || used_t[static_cast<std::size_t>(b)]) continue;
    used_p[static_cast<std::size_t>(a)] = used_t[static_cast<std::size_t>(b)] = 1;
    r.per_region[static_cast<std::size_t>(b) - 1] =
        2.0 * static_cast<double>(n) /
        static_cast<double>(size_p[static_cast<std::size_t>(a)] + size_truth[static_cast<std::size_t>(b)]);
  }
  if (nt == 0)
    r.mean = np == 0 ? 1.0 : 0.0;
  else
    r.mean = std::accumulate(r.per_region.begin(), r.per_region.end(), 0.0) / static_cast<double>(nt);
  return r;
}

struct SweepResult {
  double best_threshold = 0.0;
  double best_mean_dice = 0.0;
  std::vector<double> mean_dice;
};

inline const std::vector<double>& default_thresholds() {
  static const std::vector<double> t{0.005, 0.01, 0.02};
  return t;
}

/// Grows at each threshold and keeps the best mean Dice (first wins ties).
inline SweepResult threshold_sweep(const Volume& volume, const LabelVolume& truth,
                                   const std::vector<double>& thresholds = default_thresholds(),
                                   std::size_t min_region_size = 20) {
  if (thresholds.empty()) throw ArgumentError("threshold_sweep: no thresholds");
  SweepResult s;
  s.best_mean_dice = -1.0;
  for (double t : thresholds) {
    const double d = dice(region_grow(volume, {t, min_region_size}), truth).mean;
    s.mean_dice.push_back(d);
    if (d > s.best_mean_dice) {
      s.best_mean_dice = d;
      s.best_threshold = t;
    }
  }
  return s;
}

}  // namespace lact
