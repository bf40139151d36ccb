#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "lact/error.hpp"

namespace lact {

struct SignTest {
  std::size_t wins = 0;
  std::size_t losses = 0;
  std::size_t ties = 0;
  /// One-sided exact binomial P(X >= wins) with ties dropped.
  double p_value = 1.0;
};

/// Tests whether a[i] > b[i] more often than chance.
inline SignTest sign_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("sign_test: sample sizes differ");
  SignTest t;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i])
      ++t.wins;
    else if (a[i] < b[i])
      ++t.losses;
    else
      ++t.ties;
  }
  const std::size_t n = t.wins + t.losses;
  if (n == 0) return t;
  if (t.wins == 0) return t;
  boost::math::binomial_distribution<double> bin(static_cast<double>(n), 0.5);
  t.p_value = boost::math::cdf(boost::math::complement(bin, static_cast<double>(t.wins) - 1.0));
  return t;
}

/// Average ranks (1-based), ties share the mean rank.
inline std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw ShapeError("pearson: need two equal samples of size >= 2");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

struct RankCorrelation {
  double rho = 0.0;
  /// Two-sided p from the t approximation with n - 2 degrees of freedom.
  double p_value = 1.0;
  std::size_t n = 0;
};

inline RankCorrelation spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("spearman: sample sizes differ");
  if (a.size() < 3) throw ArgumentError("spearman: need at least 3 pairs");
  RankCorrelation c;
  c.n = a.size();
  c.rho = pearson(average_ranks(a), average_ranks(b));
  const double df = static_cast<double>(c.n) - 2.0;
  if (std::abs(c.rho) >= 1.0) {
    c.p_value = 0.0;
    return c;
  }
  const double t = c.rho * std::sqrt(df / (1.0 - c.rho * c.rho));
  boost::math::students_t_distribution<double> dist(df);
  c.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return c;
}

}  // namespace lact
