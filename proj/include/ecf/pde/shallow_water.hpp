#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "ecf/error.hpp"
#include "ecf/grid.hpp"

namespace ecf::pde {

struct ShallowWaterOptions {
  double gravity = 1.0;
  double dt = 1e-3;
  std::size_t steps = 1000;
  std::size_t record_every = 1;
  /// Largest admissible CFL number of the initial state.
  double initial_cfl_limit = 0.45;
  /// The run aborts if the CFL number exceeds this at any later step.
  double running_cfl_limit = 0.9;
};

namespace detail {

struct SweState {
  double h, hu, hv;
};

/// Rusanov (local Lax-Friedrichs) flux across a face with unit normal along
/// `axis` (0: x, 1: y).
inline SweState rusanov_flux(const SweState& l, const SweState& r, int axis, double g) {
  auto physical = [g, axis](const SweState& s) {
    const double u = s.hu / s.h;
    const double v = s.hv / s.h;
    const double p = 0.5 * g * s.h * s.h;
    return axis == 0 ? SweState{s.hu, s.hu * u + p, s.hu * v}
                     : SweState{s.hv, s.hv * u, s.hv * v + p};
  };
  auto speed = [g, axis](const SweState& s) {
    const double un = (axis == 0 ? s.hu : s.hv) / s.h;
    return std::abs(un) + std::sqrt(g * s.h);
  };
  const SweState fl = physical(l);
  const SweState fr = physical(r);
  const double a = std::max(speed(l), speed(r));
  return {0.5 * (fl.h + fr.h) - 0.5 * a * (r.h - l.h),
          0.5 * (fl.hu + fr.hu) - 0.5 * a * (r.hu - l.hu),
          0.5 * (fl.hv + fr.hv) - 0.5 * a * (r.hv - l.hv)};
}

/// Reflective wall ghost: same depth, normal momentum negated.
inline SweState wall_ghost(SweState s, int axis) {
  if (axis == 0) s.hu = -s.hu;
  else s.hv = -s.hv;
  return s;
}

}  // namespace detail

/// dt * max over cells of ((|u| + c) / dx + (|v| + c) / dy).
inline double shallow_water_cfl(const GridField& state, double gravity, double dt) {
  const GridSpec& grid = state.grid();
  const double dx = grid.spacing(0);
  const double dy = grid.spacing(1);
  double worst = 0.0;
  for (std::size_t k = 0; k < grid.points(); ++k) {
    const double h = state.channel(0)[k];
    const double c = std::sqrt(gravity * std::max(h, 0.0));
    const double u = std::abs(state.channel(1)[k] / h);
    const double v = std::abs(state.channel(2)[k] / h);
    worst = std::max(worst, dt * ((u + c) / dx + (v + c) / dy));
  }
  return worst;
}

/// First-order finite-volume shallow-water solver on a flat bed with
/// reflective walls. State channels are (h, hu, hv). Total mass changes only
/// through face fluxes, which cancel pairwise and vanish on the walls.
inline std::vector<GridField> solve_shallow_water(const GridField& ic,
                                                  const ShallowWaterOptions& opt) {
  const GridSpec& grid = ic.grid();
  require(grid.dims == 2 && grid.boundary == Boundary::kWall,
          ErrorCode::kInvalidArgument, "solve_shallow_water needs a 2-D wall grid");
  require(ic.channels() == 3, ErrorCode::kInvalidArgument,
          "shallow-water state has channels (h, hu, hv)");
  require(opt.dt > 0.0 && opt.gravity > 0.0 && opt.record_every >= 1,
          ErrorCode::kInvalidArgument, "solve_shallow_water: bad options");
  ic.check_finite("shallow-water initial state");
  for (double h : ic.channel(0))
    require(h > 0.0, ErrorCode::kInvalidArgument,
            "shallow-water initial depth must be positive");
  const double cfl0 = shallow_water_cfl(ic, opt.gravity, opt.dt);
  require(cfl0 <= opt.initial_cfl_limit, ErrorCode::kInvalidArgument,
          "shallow-water initial CFL " + std::to_string(cfl0) + " exceeds " +
              std::to_string(opt.initial_cfl_limit));

  const std::size_t nx = grid.resolution[0];
  const std::size_t ny = grid.resolution[1];
  const double rx = opt.dt / grid.spacing(0);
  const double ry = opt.dt / grid.spacing(1);
  const double g = opt.gravity;

  std::vector<GridField> frames{ic};
  GridField state = ic;
  // Face fluxes: fx[(i * ny + j)] is the face between x-cells i-1 and i, for
  // i in [0, nx]; fy[(i * (ny + 1) + j)] likewise along y.
  std::vector<detail::SweState> fx((nx + 1) * ny), fy(nx * (ny + 1));

  for (std::size_t step = 1; step <= opt.steps; ++step) {
    auto h = state.channel(0);
    auto hu = state.channel(1);
    auto hv = state.channel(2);
    auto cell = [&](std::size_t i, std::size_t j) {
      const std::size_t k = grid.index(i, j);
      return detail::SweState{h[k], hu[k], hv[k]};
    };
    for (std::size_t i = 0; i <= nx; ++i) {
      for (std::size_t j = 0; j < ny; ++j) {
        const auto l = i == 0 ? detail::wall_ghost(cell(0, j), 0) : cell(i - 1, j);
        const auto r = i == nx ? detail::wall_ghost(cell(nx - 1, j), 0) : cell(i, j);
        fx[i * ny + j] = detail::rusanov_flux(l, r, 0, g);
      }
    }
    for (std::size_t i = 0; i < nx; ++i) {
      for (std::size_t j = 0; j <= ny; ++j) {
        const auto l = j == 0 ? detail::wall_ghost(cell(i, 0), 1) : cell(i, j - 1);
        const auto r = j == ny ? detail::wall_ghost(cell(i, ny - 1), 1) : cell(i, j);
        fy[i * (ny + 1) + j] = detail::rusanov_flux(l, r, 1, g);
      }
    }
    for (std::size_t i = 0; i < nx; ++i) {
      for (std::size_t j = 0; j < ny; ++j) {
        const std::size_t k = grid.index(i, j);
        const auto& w = fx[i * ny + j];
        const auto& e = fx[(i + 1) * ny + j];
        const auto& s = fy[i * (ny + 1) + j];
        const auto& n = fy[i * (ny + 1) + j + 1];
        h[k] -= rx * (e.h - w.h) + ry * (n.h - s.h);
        hu[k] -= rx * (e.hu - w.hu) + ry * (n.hu - s.hu);
        hv[k] -= rx * (e.hv - w.hv) + ry * (n.hv - s.hv);
      }
    }
    for (std::size_t k = 0; k < grid.points(); ++k) {
      if (!(h[k] > 0.0) || !std::isfinite(hu[k]) || !std::isfinite(hv[k])) {
        fail(ErrorCode::kNumerical, "shallow-water step " + std::to_string(step) +
                                        ": depth lost positivity or state not finite");
      }
    }
    const double cfl = shallow_water_cfl(state, g, opt.dt);
    if (cfl > opt.running_cfl_limit) {
      fail(ErrorCode::kNumerical, "shallow-water step " + std::to_string(step) +
                                      ": CFL " + std::to_string(cfl) + " exceeds " +
                                      std::to_string(opt.running_cfl_limit));
    }
    if (step % opt.record_every == 0) frames.push_back(state);
  }
  return frames;
}

}  // namespace ecf::pde
