#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ecf/conservation.hpp"
#include "ecf/error.hpp"
#include "ecf/grid.hpp"
#include "ecf/parallel.hpp"
#include "ecf/pde/allen_cahn.hpp"
#include "ecf/pde/exact.hpp"
#include "ecf/pde/flux_balance.hpp"
#include "ecf/pde/initial_conditions.hpp"
#include "ecf/pde/problem.hpp"
#include "ecf/pde/shallow_water.hpp"

namespace ecf {

inline constexpr const char* kGeneratorVersion = "ecf-gen 1.0";

using Trajectory = std::vector<GridField>;

/// One split of generated trajectories with its provenance.
struct TrajectoryDataset {
  pde::ProblemParams params;
  std::string split = "train";
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> sample_seeds;
  std::vector<Trajectory> samples;  // [sample][snapshot]
  std::string generator_version = kGeneratorVersion;

  GridSpec grid() const { return params.grid(); }
  std::size_t channels() const { return params.channels(); }
  ConservationMask mask() const { return params.mask(); }
  std::size_t size() const { return samples.size(); }
  std::size_t snapshots() const { return samples.empty() ? 0 : samples[0].size(); }
  double frame_interval() const { return params.snapshot_interval(); }
};

inline std::uint64_t split_code(const std::string& split) {
  if (split == "train") return 0;
  if (split == "valid") return 1;
  if (split == "test") return 2;
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : split) h = (h ^ ch) * 1099511628211ull;
  return h;
}

/// Seed of sample `index` in `split`, derived from the master seed.
inline std::uint64_t derive_sample_seed(std::uint64_t master, const std::string& split,
                                        std::size_t index) {
  const std::uint64_t code = split_code(split);
  std::seed_seq seq{static_cast<std::uint32_t>(master),
                    static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(code),
                    static_cast<std::uint32_t>(code >> 32),
                    static_cast<std::uint32_t>(index)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

namespace pde {

/// Initial state of one sample.
inline GridField initial_condition(const ProblemParams& p, std::uint64_t seed) {
  const GridSpec grid = p.grid();
  switch (p.problem) {
    case Problem::kAcDw:
    case Problem::kHeat:
    case Problem::kCd: return chebyshev_ic(seed, p.chebyshev_order, grid);
    case Problem::kAcFh: {
      GridField u = chebyshev_ic(seed, p.chebyshev_order, grid);
      double peak = 0.0;
      for (double v : u.values()) peak = std::max(peak, std::abs(v));
      if (peak > 0.0)
        for (double& v : u.values()) v *= p.fh_ic_amplitude / peak;
      return u;
    }
    case Problem::kDiff: return grf_ic(seed, p.grf_tau, p.grf_alpha, grid, p.grf_offset);
    case Problem::kWater: {
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> centre(0.3 * p.length, 0.7 * p.length);
      std::uniform_real_distribution<double> radius(p.dam_radius_min, p.dam_radius_max);
      const double cx = centre(rng);
      const double cy = centre(rng);
      const double r = radius(rng);
      return dam_break_ic(grid, cx, cy, r * p.length, p.dam_inner_height,
                          p.dam_outer_height);
    }
  }
  fail(ErrorCode::kInvalidArgument, "unknown problem");
}

/// Snapshots at t_k = k * T / n_snapshots, k = 0 .. n_snapshots - 1.
inline Trajectory solve_trajectory(const ProblemParams& p, const GridField& ic) {
  const std::size_t frames = p.n_snapshots;
  const double interval = p.snapshot_interval();
  Trajectory out;
  switch (p.problem) {
    case Problem::kAcDw:
    case Problem::kAcFh: {
      AllenCahnOptions opt;
      opt.potential = p.problem == Problem::kAcDw ? Potential::kDoubleWell
                                                   : Potential::kFloryHuggins;
      opt.epsilon = p.epsilon;
      opt.theta = p.theta;
      opt.theta_c = p.theta_c;
      opt.dt = p.dt();
      opt.record_every = p.steps_per_snapshot();
      opt.steps = (frames - 1) * opt.record_every;
      return solve_allen_cahn(ic, opt);
    }
    case Problem::kWater: {
      ShallowWaterOptions opt;
      opt.gravity = p.gravity;
      opt.dt = p.dt();
      opt.record_every = p.steps_per_snapshot();
      opt.steps = (frames - 1) * opt.record_every;
      return solve_shallow_water(ic, opt);
    }
    case Problem::kHeat:
      for (std::size_t k = 0; k < frames; ++k)
        out.push_back(k == 0 ? ic : solve_heat_neumann(ic, p.diffusion, k * interval));
      return out;
    case Problem::kDiff:
      for (std::size_t k = 0; k < frames; ++k)
        out.push_back(k == 0 ? ic : solve_diffusion_exact(ic, p.diffusion, k * interval));
      return out;
    case Problem::kCd:
      for (std::size_t k = 0; k < frames; ++k)
        out.push_back(k == 0 ? ic
                             : solve_convdiff_exact(ic, p.diffusion, p.velocity,
                                                    k * interval));
      return out;
  }
  return out;
}

}  // namespace pde

/// Generates `count` trajectories for `split`; deterministic per master seed.
inline TrajectoryDataset generate_dataset(const pde::ProblemParams& params,
                                          const std::string& split, std::size_t count,
                                          std::uint64_t master_seed) {
  params.validate();
  TrajectoryDataset ds;
  ds.params = params;
  ds.split = split;
  ds.master_seed = master_seed;
  ds.sample_seeds.resize(count);
  ds.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    ds.sample_seeds[i] = derive_sample_seed(master_seed, split, i);
  parallel_for(count, [&](std::size_t i) {
    try {
      ds.samples[i] = pde::solve_trajectory(
          params, pde::initial_condition(params, ds.sample_seeds[i]));
    } catch (const Error& e) {
      throw Error(e.code(), std::string(to_string(params.problem)) + " " + split +
                                " sample " + std::to_string(i) + ": " + e.what());
    }
  });
  return ds;
}

/// Conservation audit of a generated split.
struct ConservationAudit {
  double max_relative_drift = 0.0;
  double max_flux_residual = 0.0;
  double drift_tolerance = 1e-10;
  double flux_tolerance = 0.0;
  bool passed() const {
    return max_relative_drift < drift_tolerance && max_flux_residual < flux_tolerance;
  }
};

inline ConservationAudit audit_conservation(const TrajectoryDataset& ds) {
  ConservationAudit audit;
  audit.flux_tolerance = pde::flux_balance_tolerance(ds.params.problem);
  const ConservationMask mask = ds.mask();
  const auto law = pde::conservation_law(ds.params.problem);
  for (const Trajectory& traj : ds.samples) {
    for (std::size_t c = 0; c < ds.channels(); ++c) {
      if (!mask[c]) continue;
      const double e0 = channel_integral(traj[0], c);
      for (const GridField& frame : traj) {
        const double drift = std::abs(channel_integral(frame, c) - e0);
        audit.max_relative_drift =
            std::max(audit.max_relative_drift, e0 != 0.0 ? drift / std::abs(e0) : drift);
      }
    }
    if (traj.size() >= 3) {
      for (double r : pde::verify_flux_balance(traj, law, ds.frame_interval(), mask))
        audit.max_flux_residual = std::max(audit.max_flux_residual, r);
    }
  }
  return audit;
}

}  // namespace ecf
