#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "ecf/conservation.hpp"
#include "ecf/error.hpp"
#include "ecf/grid.hpp"
#include "ecf/pde/problem.hpp"

namespace ecf::pde {

/// Boundary outflux (closed surface integral of F.n) or net source integral
/// of one channel of a frame.
using FrameFunctional = std::function<double(const GridField&, std::size_t channel)>;

struct FluxBalanceTerms {
  FrameFunctional boundary_outflux;  // empty: zero
  FrameFunctional source_integral;   // empty: zero
};

/// Residual r(t) = |dE/dt + boundary outflux - source integral| per frame,
/// maximized over the masked channels. dE/dt uses centred differences at
/// interior frames and one-sided differences at both ends.
inline std::vector<double> verify_flux_balance(std::span<const GridField> frames,
                                               const ConservationLawSpec& law,
                                               double frame_interval,
                                               const ConservationMask& mask,
                                               const FluxBalanceTerms& terms = {}) {
  require(frames.size() >= 3, ErrorCode::kInvalidArgument,
          "verify_flux_balance needs at least 3 frames");
  require(frame_interval > 0.0, ErrorCode::kInvalidArgument,
          "frame interval must be positive");
  require(law.boundary_flux_zero || static_cast<bool>(terms.boundary_outflux),
          ErrorCode::kInvalidArgument,
          "law has boundary flux but no outflux functional was supplied");
  const std::size_t n = frames.size();
  const std::size_t channels = frames[0].channels();
  require(mask.channels() == channels, ErrorCode::kShapeMismatch,
          "verify_flux_balance: mask/frame channel mismatch");

  std::vector<double> residual(n, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    if (!mask[c]) continue;
    std::vector<double> energy(n);
    for (std::size_t t = 0; t < n; ++t) {
      require(frames[t].same_shape(frames[0]), ErrorCode::kShapeMismatch,
              "verify_flux_balance: frames differ in shape");
      energy[t] = channel_integral(frames[t], c);
    }
    for (std::size_t t = 0; t < n; ++t) {
      double rate;
      if (t == 0) rate = (energy[1] - energy[0]) / frame_interval;
      else if (t == n - 1) rate = (energy[n - 1] - energy[n - 2]) / frame_interval;
      else rate = (energy[t + 1] - energy[t - 1]) / (2.0 * frame_interval);
      double r = rate;
      if (terms.boundary_outflux) r += terms.boundary_outflux(frames[t], c);
      if (terms.source_integral) r -= terms.source_integral(frames[t], c);
      residual[t] = std::max(residual[t], std::abs(r));
    }
  }
  return residual;
}

}  // namespace ecf::pde
