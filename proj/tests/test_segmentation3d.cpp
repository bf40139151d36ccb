#include <catch_amalgamated.hpp>

#include <map>
#include <numeric>
#include <random>
#include <set>

#include "lact/phantom.hpp"
#include "lact/segmentation.hpp"

using namespace lact;
using Catch::Approx;

namespace {

/// Union-find components over all above-threshold voxels, 6-connectivity.
std::vector<std::size_t> components(const Grid3<double>& g, double thr) {
  std::vector<std::size_t> parent(g.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  auto join = [&](std::size_t a, std::size_t b) {
    if (g[a] >= thr && g[b] >= thr) parent[find(a)] = find(b);
  };
  for (std::size_t z = 0; z < g.nz(); ++z)
    for (std::size_t y = 0; y < g.ny(); ++y)
      for (std::size_t x = 0; x < g.nx(); ++x) {
        const auto i = g.index(x, y, z);
        if (x + 1 < g.nx()) join(i, g.index(x + 1, y, z));
        if (y + 1 < g.ny()) join(i, g.index(x, y + 1, z));
        if (z + 1 < g.nz()) join(i, g.index(x, y, z + 1));
      }
  std::vector<std::size_t> root(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) root[i] = find(i);
  return root;
}

/// True when `labels` equals the oracle partition after dropping small components.
bool same_partition(const LabelVolume& labels, const Grid3<double>& g, double thr, std::size_t min_size) {
  const auto root = components(g, thr);
  std::map<std::size_t, std::size_t> size;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g[i] >= thr) ++size[root[i]];
  std::map<std::size_t, std::int32_t> r2l;
  std::map<std::int32_t, std::size_t> l2r;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const bool kept = g[i] >= thr && size[root[i]] >= min_size;
    if (!kept) {
      if (labels[i] != 0) return false;
      continue;
    }
    if (labels[i] <= 0) return false;
    auto [a, ia] = r2l.emplace(root[i], labels[i]);
    auto [b, ib] = l2r.emplace(labels[i], root[i]);
    if (a->second != labels[i] || b->second != root[i]) return false;
  }
  return true;
}

void fill_cube(Grid3<double>& g, std::size_t x0, std::size_t y0, std::size_t z0, std::size_t s, double v) {
  for (std::size_t z = z0; z < z0 + s; ++z)
    for (std::size_t y = y0; y < y0 + s; ++y)
      for (std::size_t x = x0; x < x0 + s; ++x) g.at(x, y, z) = v;
}

}  // namespace

TEST_CASE("region growing reproduces connected components", "[segmentation]") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 0.03);
  for (int trial = 0; trial < 6; ++trial) {
    Grid3<double> g(12, 10, 9);
    for (auto& v : g.storage()) v = u(rng);
    for (std::size_t min_size : {1u, 5u, 20u}) {
      const auto l = region_grow(Volume{g, 1.0}, {0.015, min_size});
      CHECK(same_partition(l, g, 0.015, min_size));
    }
  }
}

TEST_CASE("two separated cubes give two labels in brightness order", "[segmentation]") {
  Grid3<double> g(16, 16, 16);
  fill_cube(g, 1, 1, 1, 4, 0.02);
  fill_cube(g, 9, 9, 9, 5, 0.04);
  const auto l = region_grow(Volume{g, 1.0}, {0.01, 20});
  CHECK(label_count(l) == 2);
  CHECK(l.at(10, 10, 10) == 1);
  CHECK(l.at(2, 2, 2) == 2);
  CHECK(dice(l, l).mean == 1.0);
  // Minimum size drops the 64-voxel cube, keeps the 125-voxel one.
  const auto big = region_grow(Volume{g, 1.0}, {0.01, 100});
  CHECK(label_count(big) == 1);
  CHECK(big.at(2, 2, 2) == 0);
}

TEST_CASE("Dice of a half-covered region is two thirds", "[segmentation]") {
  LabelVolume truth(4, 4, 4), pred(4, 4, 4);
  for (std::size_t i = 0; i < 8; ++i) truth[i] = 1;
  for (std::size_t i = 0; i < 4; ++i) pred[i] = 3;
  const auto d = dice(pred, truth);
  REQUIRE(d.per_region.size() == 1);
  CHECK(d.per_region[0] == Approx(2.0 / 3.0).margin(1e-15));
  CHECK(d.mean == Approx(2.0 / 3.0).margin(1e-15));
  // An unmatched truth region scores zero.
  truth[40] = 2;
  CHECK(dice(pred, truth).mean == Approx(1.0 / 3.0).margin(1e-15));
}

TEST_CASE("empty label volumes", "[segmentation]") {
  LabelVolume empty(3, 3, 3), one(3, 3, 3);
  one[0] = 1;
  CHECK(dice(empty, empty).mean == 1.0);
  CHECK(dice(one, empty).mean == 0.0);
  CHECK(dice(empty, one).mean == 0.0);
  CHECK_THROWS_AS(dice(LabelVolume(2, 2, 2), empty), ShapeError);
  const auto l = region_grow(Volume{Grid3<double>(5, 5, 5), 1.0}, {});
  CHECK(label_count(l) == 0);
  CHECK_THROWS_AS(region_grow(Volume{Grid3<double>(5, 5, 5), 1.0}, {0.0, 1}), ArgumentError);
}

TEST_CASE("sweep over a clean bag finds a perfect threshold", "[segmentation]") {
  BagSpec spec;
  spec.seed = 3;
  const auto bag = gen_bag(spec, 48, 48, 32);
  REQUIRE(label_count(bag.labels) >= 2);
  const auto s = threshold_sweep(bag.volume, bag.labels);
  REQUIRE(s.mean_dice.size() == 3);
  CHECK(s.best_mean_dice == Approx(1.0));
  CHECK(s.best_threshold == 0.005);
  CHECK_THROWS_AS(threshold_sweep(bag.volume, bag.labels, {}), ArgumentError);
}
