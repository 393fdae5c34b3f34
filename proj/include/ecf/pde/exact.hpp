#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "ecf/error.hpp"
#include "ecf/fft.hpp"
#include "ecf/grid.hpp"

namespace ecf::pde {

namespace detail {

inline void check_time(double t, const char* context) {
  require(std::isfinite(t) && t >= 0.0, ErrorCode::kInvalidArgument,
          std::string(context) + ": time must be finite and non-negative");
}

/// Multiplies every Fourier mode of a periodic field by factor(k, nyquist),
/// where k is the angular wavenumber vector and nyquist flags the Nyquist
/// index of an even axis (whose +k and -k share one coefficient).
template <typename Factor>
GridField apply_periodic_multiplier(const GridField& ic, Factor&& factor,
                                    const char* context) {
  const GridSpec& grid = ic.grid();
  require(grid.boundary == Boundary::kPeriodic, ErrorCode::kInvalidArgument,
          std::string(context) + " needs a periodic grid");
  Spectrum spec = fft_forward(ic);
  const std::size_t nx = grid.resolution[0];
  const std::size_t ny = grid.resolution[1];
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < nx; ++i) {
    const double kx = two_pi * signed_frequency(i, nx) / grid.lengths[0];
    const bool nyq_x = nx % 2 == 0 && 2 * i == nx;
    for (std::size_t j = 0; j < ny; ++j) {
      const double ky =
          grid.dims == 2 ? two_pi * signed_frequency(j, ny) / grid.lengths[1] : 0.0;
      const bool nyq_y = grid.dims == 2 && ny % 2 == 0 && 2 * j == ny;
      const Complex f = factor(kx, ky, nyq_x, nyq_y);
      for (std::size_t c = 0; c < ic.channels(); ++c)
        spec.channel(c)[grid.index(i, j)] *= f;
    }
  }
  GridField out = fft_inverse(spec);
  out.set_precision(ic.precision());
  return out;
}

}  // namespace detail

/// Periodic diffusion u_t = D lap u, solved exactly mode by mode.
inline GridField solve_diffusion_exact(const GridField& ic, double diffusion, double t) {
  detail::check_time(t, "solve_diffusion_exact");
  return detail::apply_periodic_multiplier(
      ic,
      [&](double kx, double ky, bool, bool) {
        return Complex(std::exp(-diffusion * (kx * kx + ky * ky) * t), 0.0);
      },
      "solve_diffusion_exact");
}

/// Periodic convection-diffusion u_t + v.grad u = D lap u, solved exactly:
/// mode factor exp(-(D |k|^2 + i k.v) t). On a Nyquist index the advection
/// phase is replaced by its real part cos(k v t) so the output stays real.
inline GridField solve_convdiff_exact(const GridField& ic, double diffusion,
                                      std::array<double, 2> velocity, double t) {
  detail::check_time(t, "solve_convdiff_exact");
  return detail::apply_periodic_multiplier(
      ic,
      [&](double kx, double ky, bool nyq_x, bool nyq_y) {
        const double decay = std::exp(-diffusion * (kx * kx + ky * ky) * t);
        auto phase = [t](double k, double v, bool nyquist) {
          return nyquist ? Complex(std::cos(k * v * t), 0.0)
                         : std::polar(1.0, -k * v * t);
        };
        return decay * phase(kx, velocity[0], nyq_x) * phase(ky, velocity[1], nyq_y);
      },
      "solve_convdiff_exact");
}

/// Heat equation with zero-flux (Neumann) walls on a cell-centred grid,
/// solved exactly in the cosine eigenbasis: factor exp(-D (pi n / L)^2 t).
inline GridField solve_heat_neumann(const GridField& ic, double diffusion, double t) {
  detail::check_time(t, "solve_heat_neumann");
  const GridSpec& grid = ic.grid();
  require(grid.boundary == Boundary::kNeumann, ErrorCode::kInvalidArgument,
          "solve_heat_neumann needs a Neumann grid");
  ic.check_finite("solve_heat_neumann input");
  const std::size_t nx = grid.resolution[0];
  const std::size_t ny = grid.resolution[1];
  double norm = 2.0 * static_cast<double>(nx);
  if (grid.dims == 2) norm *= 2.0 * static_cast<double>(ny);
  std::vector<double> decay(grid.points());
  for (std::size_t i = 0; i < nx; ++i) {
    const double kx = std::numbers::pi * static_cast<double>(i) / grid.lengths[0];
    for (std::size_t j = 0; j < ny; ++j) {
      const double ky = grid.dims == 2
                            ? std::numbers::pi * static_cast<double>(j) / grid.lengths[1]
                            : 0.0;
      decay[grid.index(i, j)] = std::exp(-diffusion * (kx * kx + ky * ky) * t) / norm;
    }
  }
  GridField out(grid, ic.channels(), ic.precision());
  std::vector<double> coeffs(grid.points());
  for (std::size_t c = 0; c < ic.channels(); ++c) {
    ecf::detail::cosine_transform(ic.channel(c), coeffs, grid, true);
    for (std::size_t k = 0; k < coeffs.size(); ++k) coeffs[k] *= decay[k];
    ecf::detail::cosine_transform(coeffs, out.channel(c), grid, false);
  }
  return out;
}

}  // namespace ecf::pde
