#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "ecf/error.hpp"
#include "ecf/fft.hpp"
#include "ecf/grid.hpp"

namespace ecf::pde {

enum class Potential { kDoubleWell, kFloryHuggins };

struct AllenCahnOptions {
  Potential potential = Potential::kDoubleWell;
  double epsilon = 0.01;
  double theta = 0.8;
  double theta_c = 1.6;
  double dt = 1e-4;
  std::size_t steps = 1000;
  /// Store a frame every `record_every` steps (frame 0 is the initial state).
  std::size_t record_every = 1;
  /// Re-pin the mean to its initial value after every step.
  bool project_mean = true;
};

/// Flory-Huggins states are clipped into this band before the logarithm.
inline constexpr double kFloryHugginsBand = 1.0 - 1e-6;

/// Nonlinear reaction term f(u) of the conserved Allen-Cahn equation
///   u_t = eps lap u + f(u) - mean(f(u)).
/// Throws when a Flory-Huggins state leaves (-1, 1).
inline double allen_cahn_reaction(double u, const AllenCahnOptions& opt) {
  if (opt.potential == Potential::kDoubleWell) return u - u * u * u;
  if (!(std::abs(u) < 1.0)) {
    fail(ErrorCode::kNumerical,
         "Flory-Huggins state " + std::to_string(u) + " outside (-1, 1)");
  }
  const double v = std::clamp(u, -kFloryHugginsBand, kFloryHugginsBand);
  return 0.5 * opt.theta * std::log((1.0 + v) / (1.0 - v)) - opt.theta_c * v;
}

/// First-order IMEX pseudo-spectral stepper on a periodic grid: the
/// Laplacian is implicit in Fourier space, the reaction explicit with its
/// mean removed.
inline std::vector<GridField> solve_allen_cahn(const GridField& ic,
                                               const AllenCahnOptions& opt) {
  const GridSpec& grid = ic.grid();
  require(grid.boundary == Boundary::kPeriodic, ErrorCode::kInvalidArgument,
          "solve_allen_cahn needs a periodic grid");
  require(ic.channels() == 1, ErrorCode::kInvalidArgument,
          "solve_allen_cahn expects a single-channel state");
  require(opt.dt > 0.0 && opt.epsilon > 0.0, ErrorCode::kInvalidArgument,
          "solve_allen_cahn: dt and epsilon must be positive");
  require(opt.record_every >= 1, ErrorCode::kInvalidArgument,
          "record_every must be positive");
  ic.check_finite("Allen-Cahn initial state");

  const std::size_t n = grid.points();
  const std::size_t nx = grid.resolution[0];
  const std::size_t ny = grid.resolution[1];
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<double> implicit(n);
  for (std::size_t i = 0; i < nx; ++i) {
    const double kx = two_pi * signed_frequency(i, nx) / grid.lengths[0];
    for (std::size_t j = 0; j < ny; ++j) {
      const double ky =
          grid.dims == 2 ? two_pi * signed_frequency(j, ny) / grid.lengths[1] : 0.0;
      implicit[grid.index(i, j)] = 1.0 / (1.0 + opt.dt * opt.epsilon * (kx * kx + ky * ky));
    }
  }

  std::vector<GridField> frames{ic};
  GridField u = ic;
  const double initial_mean = channel_mean(ic, 0);
  std::vector<Complex> state(n), reaction(n), spec_u(n), spec_f(n);
  const double inv_n = 1.0 / static_cast<double>(n);

  for (std::size_t step = 1; step <= opt.steps; ++step) {
    auto values = u.channel(0);
    try {
      for (std::size_t k = 0; k < n; ++k) {
        state[k] = Complex(values[k], 0.0);
        reaction[k] = Complex(allen_cahn_reaction(values[k], opt), 0.0);
      }
    } catch (const Error& e) {
      fail(e.code(), "Allen-Cahn step " + std::to_string(step) + ": " + e.what() +
                         " (time step too large or initial state inadmissible)");
    }
    ecf::detail::dft(state, spec_u, grid, -1);
    ecf::detail::dft(reaction, spec_f, grid, -1);
    spec_f[0] = 0.0;  // nonlocal term: subtract the mean of f(u)
    for (std::size_t k = 0; k < n; ++k)
      spec_u[k] = (spec_u[k] + opt.dt * spec_f[k]) * implicit[k] * inv_n;
    ecf::detail::dft(spec_u, state, grid, +1);
    for (std::size_t k = 0; k < n; ++k) values[k] = state[k].real();

    if (opt.project_mean) {
      const double shift = initial_mean - channel_mean(u, 0);
      for (double& v : values) v += shift;
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (!std::isfinite(values[k])) {
        fail(ErrorCode::kNonFinite,
             "Allen-Cahn step " + std::to_string(step) + ": non-finite state");
      }
    }
    if (step % opt.record_every == 0) frames.push_back(u);
  }
  return frames;
}

}  // namespace ecf::pde
