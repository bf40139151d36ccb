#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <vector>

#include "lact/error.hpp"
#include "lact/geometry.hpp"
#include "lact/image.hpp"

namespace lact {

/// Ramp-filtered projections Q_theta(r); same layout as the source sinogram.
struct FilteredSinogram {
  Sinogram rows;
};

inline std::size_t ramp_padded_length(std::size_t n_bins) {
  std::size_t n = 1;
  while (n < 2 * n_bins) n <<= 1;
  return n;
}

/// |omega| response on the r2c frequency grid of a length-n transform, in
/// cycles per unit length.
inline std::vector<double> ramp_response(std::size_t n, double bin_spacing) {
  std::vector<double> h(n / 2 + 1);
  for (std::size_t k = 0; k < h.size(); ++k)
    h[k] = static_cast<double>(k) / (static_cast<double>(n) * bin_spacing);
  return h;
}

namespace detail {

struct FftwPlanDeleter {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
using FftwPlan = std::unique_ptr<fftw_plan_s, FftwPlanDeleter>;

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

}  // namespace detail

/// Unwindowed Ram-Lak filtering of every row: zero-pad to a power of two at
/// least twice the bin count, multiply the spectrum by |omega|, transform
/// back and truncate.
inline FilteredSinogram ramp_filter(const Sinogram& sinogram) {
  const auto& g = sinogram.geometry();
  if (g.n_bins < 2) throw ShapeError("ramp_filter: need at least 2 detector bins");
  const std::size_t n = ramp_padded_length(g.n_bins);
  const auto response = ramp_response(n, g.bin_spacing);

  std::unique_ptr<double, detail::FftwFree> buf(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
  std::unique_ptr<fftw_complex, detail::FftwFree> spec(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1))));
  const int len = static_cast<int>(n);
  detail::FftwPlan fwd(fftw_plan_dft_r2c_1d(len, buf.get(), spec.get(), FFTW_ESTIMATE));
  detail::FftwPlan inv(fftw_plan_dft_c2r_1d(len, spec.get(), buf.get(), FFTW_ESTIMATE));

  FilteredSinogram out{Sinogram(g)};
  for (std::size_t v = 0; v < g.n_views; ++v) {
    auto src = sinogram.row(v);
    std::fill(buf.get(), buf.get() + n, 0.0);
    std::copy(src.begin(), src.end(), buf.get());
    fftw_execute(fwd.get());
    for (std::size_t k = 0; k <= n / 2; ++k) {
      spec.get()[k][0] *= response[k];
      spec.get()[k][1] *= response[k];
    }
    fftw_execute(inv.get());
    auto dst = out.rows.row(v);
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t b = 0; b < g.n_bins; ++b) dst[b] = buf.get()[b] * scale;
  }
  return out;
}

/// Smears filtered rows back over the image:
/// Y(x, y) = dtheta * sum_i Q_i(x cos(theta_i) + y sin(theta_i)), linear in r.
inline SliceImage smear_filtered(const FilteredSinogram& filtered, std::size_t nx, std::size_t ny) {
  const auto& g = filtered.rows.geometry();
  require_support(g, nx, ny);
  SliceImage img(nx, ny);
  const double dtheta = g.step_rad();
  std::vector<double> xs(nx), ys(ny);
  for (std::size_t i = 0; i < nx; ++i) xs[i] = img.x_of(i);
  for (std::size_t j = 0; j < ny; ++j) ys[j] = img.y_of(j);
  const auto last = static_cast<long>(g.n_bins) - 1;
  for (std::size_t v = 0; v < g.n_views; ++v) {
    const double t = g.angle_rad(v);
    const double c = std::cos(t) / g.bin_spacing;
    const double s = std::sin(t) / g.bin_spacing;
    auto q = filtered.rows.row(v);
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i) {
        const double u = xs[i] * c + ys[j] * s + g.detector_center;
        const double fl = std::floor(u);
        const long b0 = static_cast<long>(fl);
        const double w = u - fl;
        double val = 0.0;
        if (b0 >= 0 && b0 <= last) val += (1.0 - w) * q[static_cast<std::size_t>(b0)];
        if (b0 + 1 >= 0 && b0 + 1 <= last) val += w * q[static_cast<std::size_t>(b0 + 1)];
        img.at(i, j) += val;
      }
    }
  }
  for (double& x : img.storage()) x *= dtheta;
  return img;
}

/// Filtered back projection over whatever views the sinogram carries.
inline SliceImage fbp_reconstruct(const Sinogram& sinogram, std::size_t nx, std::size_t ny) {
  validate(sinogram.geometry());
  if (nx == 0 || ny == 0) throw ShapeError("fbp_reconstruct: empty image size");
  require_support(sinogram.geometry(), nx, ny);
  return smear_filtered(ramp_filter(sinogram), nx, ny);
}

}  // namespace lact
