#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "ecf/error.hpp"
#include "ecf/fft.hpp"
#include "ecf/grid.hpp"

namespace ecf::pde {

/// T_0..T_{order-1} evaluated at xi in [-1, 1] by the three-term recurrence.
inline std::vector<double> chebyshev_values(double xi, int order) {
  std::vector<double> t(static_cast<std::size_t>(order));
  if (order > 0) t[0] = 1.0;
  if (order > 1) t[1] = xi;
  for (int k = 2; k < order; ++k) t[k] = 2.0 * xi * t[k - 1] - t[k - 2];
  return t;
}

/// u(x, y) = sum_{i,j < order} c_ij T_i(xi(x)) T_j(xi(y)), with xi the affine
/// map [0, L] -> [-1, 1]. `coeffs` is row-major order x order.
inline GridField chebyshev_field(const std::vector<double>& coeffs, int order,
                                 const GridSpec& grid) {
  require(grid.dims == 2, ErrorCode::kUnsupported,
          "chebyshev initial conditions need a 2-D grid");
  require(order >= 1 && coeffs.size() == static_cast<std::size_t>(order * order),
          ErrorCode::kInvalidArgument, "chebyshev coefficient count mismatch");
  const std::size_t nx = grid.resolution[0];
  const std::size_t ny = grid.resolution[1];
  std::vector<std::vector<double>> tx(nx), ty(ny);
  for (std::size_t i = 0; i < nx; ++i)
    tx[i] = chebyshev_values(2.0 * grid.coordinate(0, i) / grid.lengths[0] - 1.0, order);
  for (std::size_t j = 0; j < ny; ++j)
    ty[j] = chebyshev_values(2.0 * grid.coordinate(1, j) / grid.lengths[1] - 1.0, order);

  GridField field(grid, 1);
  const auto n = static_cast<std::size_t>(order);
  for (std::size_t i = 0; i < nx; ++i) {
    // Contract over the first index once per row.
    std::vector<double> row(n, 0.0);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) row[b] += coeffs[a * n + b] * tx[i][a];
    for (std::size_t j = 0; j < ny; ++j) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b) s += row[b] * ty[j][b];
      field.at(0, i, j) = s;
    }
  }
  return field;
}

/// Random Chebyshev combination with c_ij ~ U[-1, 1], deterministic per seed.
inline GridField chebyshev_ic(std::uint64_t seed, int order, const GridSpec& grid) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  std::vector<double> coeffs(static_cast<std::size_t>(order * order));
  for (double& c : coeffs) c = uniform(rng);
  return chebyshev_field(coeffs, order, grid);
}

/// Standard deviation of the normalized Fourier coefficient of mode n under
/// GRF(tau, alpha): sigma (4 pi^2 |n|^2 / L^2 + tau^2)^(-alpha / 2), with
/// sigma = tau^((2 alpha - m) / 2).
inline double grf_mode_stddev(double k_squared, double tau, double alpha, int dims) {
  const double sigma = std::pow(tau, 0.5 * (2.0 * alpha - dims));
  return sigma * std::pow(k_squared + tau * tau, -0.5 * alpha);
}

/// Gaussian random field sample with zero mean plus `offset`.
inline GridField grf_ic(std::uint64_t seed, double tau, double alpha,
                        const GridSpec& grid, double offset = 0.0) {
  require(grid.boundary == Boundary::kPeriodic, ErrorCode::kInvalidArgument,
          "GRF sampling needs a periodic grid");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t nx = grid.resolution[0];
  const std::size_t ny = grid.resolution[1];
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<Complex> coeffs(grid.points());
  for (std::size_t i = 0; i < nx; ++i) {
    const double kx = two_pi * signed_frequency(i, nx) / grid.lengths[0];
    for (std::size_t j = 0; j < ny; ++j) {
      const double ky =
          grid.dims == 2 ? two_pi * signed_frequency(j, ny) / grid.lengths[1] : 0.0;
      const double re = normal(rng);
      const double im = normal(rng);
      if (i == 0 && j == 0) continue;
      const double s = grf_mode_stddev(kx * kx + ky * ky, tau, alpha, grid.dims);
      coeffs[grid.index(i, j)] = Complex(s * re, s * im);
    }
  }
  // The real part of an arbitrary complex field has a conjugate-symmetric
  // spectrum (c_n + conj(c_-n)) / 2 with the same per-mode power.
  std::vector<Complex> samples(grid.points());
  ecf::detail::dft(coeffs, samples, grid, +1);
  GridField field(grid, 1);
  auto out = field.channel(0);
  for (std::size_t k = 0; k < samples.size(); ++k) out[k] = samples[k].real() + offset;
  return field;
}

/// Radial dam break: depth `inner` within `radius` of (cx, cy), `outer`
/// elsewhere, fluid at rest. Channels are (h, hu, hv).
inline GridField dam_break_ic(const GridSpec& grid, double cx, double cy,
                              double radius, double inner, double outer) {
  require(grid.dims == 2, ErrorCode::kUnsupported, "dam break needs a 2-D grid");
  GridField state(grid, 3);
  for (std::size_t i = 0; i < grid.resolution[0]; ++i) {
    for (std::size_t j = 0; j < grid.resolution[1]; ++j) {
      const double dx = grid.coordinate(0, i) - cx;
      const double dy = grid.coordinate(1, j) - cy;
      state.at(0, i, j) = dx * dx + dy * dy < radius * radius ? inner : outer;
    }
  }
  return state;
}

}  // namespace ecf::pde
