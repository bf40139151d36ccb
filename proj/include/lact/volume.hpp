#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lact/error.hpp"
#include "lact/image.hpp"

namespace lact {

/// Stack of equally sized slices, x fastest then y then z.
template <class T>
class Grid3 {
 public:
  Grid3() = default;
  Grid3(std::size_t nx, std::size_t ny, std::size_t nz, T fill = T{})
      : nx_(nx), ny_(ny), nz_(nz), values_(nx * ny * nz, fill) {}
  Grid3(std::size_t nx, std::size_t ny, std::size_t nz, std::vector<T> values)
      : nx_(nx), ny_(ny), nz_(nz), values_(std::move(values)) {
    if (values_.size() != nx * ny * nz) throw ShapeError("Grid3: value count does not match shape");
  }

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t nz() const { return nz_; }
  std::size_t size() const { return values_.size(); }
  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return (z * ny_ + y) * nx_ + x;
  }

  T& at(std::size_t x, std::size_t y, std::size_t z) { return values_[index(x, y, z)]; }
  const T& at(std::size_t x, std::size_t y, std::size_t z) const { return values_[index(x, y, z)]; }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  std::vector<T>& storage() { return values_; }
  const std::vector<T>& storage() const { return values_; }

  bool same_shape(const Grid3& o) const { return nx_ == o.nx_ && ny_ == o.ny_ && nz_ == o.nz_; }
  template <class U>
  bool same_shape(const Grid3<U>& o) const {
    return nx_ == o.nx() && ny_ == o.ny() && nz_ == o.nz();
  }

  friend bool operator==(const Grid3&, const Grid3&) = default;

 private:
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  std::size_t nz_ = 0;
  std::vector<T> values_;
};

/// Attenuation volume assembled slice by slice.
struct Volume {
  Grid3<double> grid;
  double slice_spacing = 1.0;
};

/// Non-negative labels, 0 is background.
using LabelVolume = Grid3<std::int32_t>;

inline SliceImage slice_of(const Volume& v, std::size_t z) {
  const auto n = v.grid.nx() * v.grid.ny();
  std::vector<double> vals(v.grid.storage().begin() + static_cast<std::ptrdiff_t>(z * n),
                           v.grid.storage().begin() + static_cast<std::ptrdiff_t>((z + 1) * n));
  return SliceImage(v.grid.nx(), v.grid.ny(), std::move(vals));
}

/// Builds a volume from same-sized slices.
inline Volume stack_slices(const std::vector<SliceImage>& slices, double slice_spacing = 1.0) {
  if (slices.empty()) return Volume{};
  const auto nx = slices.front().nx();
  const auto ny = slices.front().ny();
  std::vector<double> vals;
  vals.reserve(nx * ny * slices.size());
  for (const auto& s : slices) {
    if (s.nx() != nx || s.ny() != ny) throw ShapeError("stack_slices: slices differ in size");
    vals.insert(vals.end(), s.storage().begin(), s.storage().end());
  }
  return Volume{Grid3<double>(nx, ny, slices.size(), std::move(vals)), slice_spacing};
}

}  // namespace lact
