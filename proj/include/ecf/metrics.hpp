#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ecf/conservation.hpp"
#include "ecf/error.hpp"
#include "ecf/grid.hpp"

namespace ecf {

/// RMSE of one channel: sqrt(mean of squared differences).
inline double channel_rmse(const GridField& pred, const GridField& truth, std::size_t c) {
  const auto p = pred.channel(c);
  const auto t = truth.channel(c);
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double d = p[k] - t[k];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(p.size()));
}

/// Per-channel RMSE averaged over channels.
inline double rmse(const GridField& pred, const GridField& truth) {
  require_same_shape(pred, truth, "rmse");
  double s = 0.0;
  for (std::size_t c = 0; c < pred.channels(); ++c) s += channel_rmse(pred, truth, c);
  return s / static_cast<double>(pred.channels());
}

struct ConservationSeries {
  std::vector<double> error;          // one value per frame, max over masked channels
  std::vector<std::size_t> skipped;   // masked channels with a zero truth integral
  std::vector<std::string> warnings;
};

/// Error(t) = |int pred - int truth| / |int truth| with the rectangle rule,
/// maximized over masked channels. Channels whose truth integral vanishes at
/// some frame are skipped and reported.
inline ConservationSeries relative_conservation_error(const std::vector<GridField>& pred,
                                                      const std::vector<GridField>& truth,
                                                      const ConservationMask& mask) {
  require(pred.size() == truth.size(), ErrorCode::kShapeMismatch,
          "relative_conservation_error: trajectories have " + std::to_string(pred.size()) +
              " and " + std::to_string(truth.size()) + " frames");
  ConservationSeries out;
  out.error.assign(pred.size(), 0.0);
  if (pred.empty()) return out;
  mask.validate_for(truth[0].channels());
  for (std::size_t c = 0; c < truth[0].channels(); ++c) {
    if (!mask[c]) continue;
    bool degenerate = false;
    for (const auto& f : truth)
      if (channel_integral(f, c) == 0.0) degenerate = true;
    if (degenerate) {
      out.skipped.push_back(c);
      out.warnings.push_back("channel " + std::to_string(c) +
                             " has zero truth integral; skipped");
      continue;
    }
    for (std::size_t t = 0; t < pred.size(); ++t) {
      require_same_shape(pred[t], truth[t], "relative_conservation_error");
      const double ref = channel_integral(truth[t], c);
      const double e = std::abs(channel_integral(pred[t], c) - ref) / std::abs(ref);
      out.error[t] = std::max(out.error[t], e);
    }
  }
  return out;
}

}  // namespace ecf
