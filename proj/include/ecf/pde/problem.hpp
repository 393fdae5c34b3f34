#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>

#include "ecf/conservation.hpp"
#include "ecf/error.hpp"
#include "ecf/grid.hpp"

namespace ecf::pde {

enum class Problem { kAcDw, kAcFh, kHeat, kWater, kDiff, kCd };

inline constexpr std::array<Problem, 6> kAllProblems = {
    Problem::kAcDw, Problem::kAcFh, Problem::kHeat,
    Problem::kWater, Problem::kDiff, Problem::kCd};

inline std::string_view to_string(Problem p) {
  switch (p) {
    case Problem::kAcDw: return "ac_dw";
    case Problem::kAcFh: return "ac_fh";
    case Problem::kHeat: return "heat";
    case Problem::kWater: return "water";
    case Problem::kDiff: return "diff";
    case Problem::kCd: return "cd";
  }
  return "?";
}

inline Problem parse_problem(std::string_view s) {
  for (Problem p : kAllProblems)
    if (to_string(p) == s) return p;
  fail(ErrorCode::kInvalidArgument, "unknown problem '" + std::string(s) + "'");
}

/// Generation parameters. Only the fields relevant to `problem` are read.
struct ProblemParams {
  Problem problem = Problem::kDiff;
  std::size_t resolution = 32;
  double length = 1.0;

  // Allen-Cahn
  double epsilon = 0.01;
  double theta = 0.8;
  double theta_c = 1.6;
  // Flory-Huggins initial states are rescaled to max |u| = this value.
  double fh_ic_amplitude = 0.9;

  // Diffusion / convection-diffusion / heat
  double diffusion = 0.01;
  std::array<double, 2> velocity{1.0, 0.5};

  // Shallow water (radial dam break on a flat bed)
  double gravity = 1.0;
  double dam_inner_height = 2.0;
  double dam_outer_height = 1.0;
  double dam_radius_min = 0.1;
  double dam_radius_max = 0.3;

  // Initial conditions
  int chebyshev_order = 20;
  double grf_tau = 5.0;
  double grf_alpha = 2.0;
  double grf_offset = 1.0;

  double t_final = 1.0;
  std::size_t n_steps = 1000;
  std::size_t n_snapshots = 20;

  std::size_t channels() const { return problem == Problem::kWater ? 3 : 1; }

  Boundary boundary() const {
    switch (problem) {
      case Problem::kHeat: return Boundary::kNeumann;
      case Problem::kWater: return Boundary::kWall;
      default: return Boundary::kPeriodic;
    }
  }

  GridSpec grid() const {
    return GridSpec::square(resolution, length, boundary());
  }

  /// Water conserves depth only; every other problem conserves its state.
  ConservationMask mask() const {
    return problem == Problem::kWater ? ConservationMask::only(3, 0)
                                      : ConservationMask::all(1);
  }

  double dt() const { return t_final / static_cast<double>(n_steps); }
  std::size_t steps_per_snapshot() const { return n_steps / n_snapshots; }
  double snapshot_interval() const {
    return dt() * static_cast<double>(steps_per_snapshot());
  }

  void validate() const {
    grid().validate();
    require(resolution >= 2, ErrorCode::kInvalidArgument,
            "resolution must be at least 2");
    require(n_snapshots >= 2, ErrorCode::kInvalidArgument,
            "need at least two snapshots");
    require(n_steps >= n_snapshots && n_steps % n_snapshots == 0,
            ErrorCode::kInvalidArgument,
            "n_snapshots must divide n_steps evenly");
    require(std::isfinite(t_final) && t_final > 0.0,
            ErrorCode::kInvalidArgument, "t_final must be positive");
    auto positive = [](double v, const char* name) {
      require(std::isfinite(v) && v > 0.0, ErrorCode::kInvalidArgument,
              std::string(name) + " must be positive");
    };
    switch (problem) {
      case Problem::kAcDw: positive(epsilon, "epsilon"); break;
      case Problem::kAcFh:
        positive(epsilon, "epsilon");
        positive(theta, "theta");
        require(std::isfinite(theta_c), ErrorCode::kInvalidArgument,
                "theta_c must be finite");
        positive(fh_ic_amplitude, "fh_ic_amplitude");
        break;
      case Problem::kHeat:
      case Problem::kDiff: positive(diffusion, "diffusion"); break;
      case Problem::kCd:
        positive(diffusion, "diffusion");
        require(std::isfinite(velocity[0]) && std::isfinite(velocity[1]),
                ErrorCode::kInvalidArgument, "velocity must be finite");
        break;
      case Problem::kWater:
        positive(gravity, "gravity");
        positive(dam_inner_height, "dam_inner_height");
        positive(dam_outer_height, "dam_outer_height");
        positive(dam_radius_min, "dam_radius_min");
        require(dam_radius_max >= dam_radius_min, ErrorCode::kInvalidArgument,
                "dam_radius_max must be >= dam_radius_min");
        break;
    }
  }
};

/// Full-resolution settings for each benchmark problem.
inline ProblemParams paper_scale(Problem p) {
  ProblemParams params;
  params.problem = p;
  params.n_steps = 1000;
  params.n_snapshots = 20;
  switch (p) {
    case Problem::kAcDw: params.resolution = 128; params.t_final = 0.1; break;
    case Problem::kAcFh: params.resolution = 64; params.t_final = 0.1; break;
    case Problem::kHeat: params.resolution = 128; params.t_final = 1.0; break;
    case Problem::kWater: params.resolution = 128; params.t_final = 1.0; break;
    case Problem::kDiff: params.resolution = 100; params.t_final = 1.0; break;
    case Problem::kCd: params.resolution = 128; params.t_final = 0.1; break;
  }
  return params;
}

/// Same physics on a 32x32 grid.
inline ProblemParams desk_scale(Problem p) {
  ProblemParams params = paper_scale(p);
  params.resolution = 32;
  return params;
}

/// Symbolic description of the conservation law d_t u + div F(u) = S.
struct ConservationLawSpec {
  std::string flux;
  std::string source;
  bool boundary_flux_zero = true;
};

inline ConservationLawSpec conservation_law(Problem p) {
  switch (p) {
    case Problem::kAcDw:
      return {"F(u) = -eps grad u", "u - u^3 - mean(u - u^3) (zero integral)", true};
    case Problem::kAcFh:
      return {"F(u) = -eps grad u",
              "f(u) - mean(f(u)), f = theta/2 ln((1+u)/(1-u)) - theta_c u (zero integral)",
              true};
    case Problem::kHeat: return {"F(u) = -D grad u, grad u . n = 0", "0", true};
    case Problem::kWater: return {"F(h) = h (u, v), reflective walls", "0", true};
    case Problem::kDiff: return {"F(u) = -D grad u, periodic", "0", true};
    case Problem::kCd: return {"F(u) = (u, v) phi - D grad phi, periodic", "0", true};
  }
  return {};
}

/// Residual tolerance on |dE/dt| for generated trajectories.
inline double flux_balance_tolerance(Problem p) {
  switch (p) {
    case Problem::kDiff:
    case Problem::kCd: return 1e-12;
    default: return 1e-10;
  }
}

}  // namespace ecf::pde
