#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <string>
#include <vector>

#include "ecf/error.hpp"
#include "ecf/fft.hpp"
#include "ecf/grid.hpp"

namespace ecf {

/// Which channels obey a conservation law and receive the correction.
class ConservationMask {
 public:
  ConservationMask() = default;
  explicit ConservationMask(std::vector<bool> flags) : flags_(std::move(flags)) {}

  static ConservationMask all(std::size_t channels) {
    return ConservationMask(std::vector<bool>(channels, true));
  }
  static ConservationMask only(std::size_t channels, std::size_t channel) {
    std::vector<bool> flags(channels, false);
    flags.at(channel) = true;
    return ConservationMask(std::move(flags));
  }
  static ConservationMask from_bits(std::size_t channels, std::uint32_t bits) {
    std::vector<bool> flags(channels);
    for (std::size_t c = 0; c < channels; ++c) flags[c] = (bits >> c) & 1u;
    return ConservationMask(std::move(flags));
  }

  std::size_t channels() const { return flags_.size(); }
  bool operator[](std::size_t c) const { return flags_[c]; }
  bool any() const {
    for (bool f : flags_)
      if (f) return true;
    return false;
  }
  std::uint32_t bits() const {
    std::uint32_t b = 0;
    for (std::size_t c = 0; c < flags_.size(); ++c)
      if (flags_[c]) b |= (1u << c);
    return b;
  }
  bool operator==(const ConservationMask&) const = default;

  /// Mask used by an ECF-enabled run: sized to the field, at least one flag.
  void validate_for(std::size_t channels) const {
    require(flags_.size() == channels, ErrorCode::kShapeMismatch,
            "conservation mask has " + std::to_string(flags_.size()) +
                " channels, field has " + std::to_string(channels));
    require(any(), ErrorCode::kInvalidArgument,
            "conservation mask must flag at least one channel");
  }

 private:
  std::vector<bool> flags_;
};

/// Per-channel zero mode c0 (the field mean) and integral E = c0 * L^m.
struct ConservedQuantity {
  GridSpec grid;
  std::vector<double> zero_mode;
  std::vector<double> integral;

  std::size_t channels() const { return zero_mode.size(); }
};

/// Encoder: reads the zero-frequency component of every channel.
///
/// The normalized zero mode is exactly the arithmetic mean, so it is computed
/// as a direct sum rather than through a full transform.
inline ConservedQuantity encode_conserved(const GridField& field,
                                          const ConservationMask& mask) {
  field.check_finite("encode_conserved input");
  require(mask.channels() == field.channels(), ErrorCode::kShapeMismatch,
          "encode_conserved: mask/field channel mismatch");
  ConservedQuantity q;
  q.grid = field.grid();
  const double volume = field.grid().domain_volume();
  for (std::size_t c = 0; c < field.channels(); ++c) {
    const double mean = channel_mean(field, c);
    q.zero_mode.push_back(mean);
    q.integral.push_back(mean * volume);
  }
  return q;
}

namespace detail {

inline void check_correction_args(const GridSpec& grid, std::size_t channels,
                                  const ConservedQuantity& target,
                                  const ConservationMask& mask,
                                  const char* context) {
  require(grid == target.grid, ErrorCode::kShapeMismatch,
          std::string(context) + ": prediction and target grids differ");
  require(target.channels() == channels, ErrorCode::kShapeMismatch,
          std::string(context) + ": target channel count mismatch");
  require(mask.channels() == channels, ErrorCode::kShapeMismatch,
          std::string(context) + ": mask channel count mismatch");
}

}  // namespace detail

/// Correction operator on the spectrum: replaces the zero mode of every
/// masked channel by the target and leaves every other coefficient untouched.
inline Spectrum correct_spectrum(const Spectrum& pred,
                                 const ConservedQuantity& target,
                                 const ConservationMask& mask) {
  detail::check_correction_args(pred.grid(), pred.channels(), target, mask,
                                "correct_spectrum");
  Spectrum out = pred;
  for (std::size_t c = 0; c < pred.channels(); ++c) {
    if (!mask[c]) continue;
    // Imaginary part forced to zero: the corrected spectrum stays real-valued.
    out.channel(c)[0] = Complex(target.zero_mode[c], 0.0);
  }
  return out;
}

/// Decoder: transform, replace the zero mode, transform back.
inline GridField correct_field(const GridField& pred,
                               const ConservedQuantity& target,
                               const ConservationMask& mask) {
  detail::check_correction_args(pred.grid(), pred.channels(), target, mask,
                                "correct_field");
  GridField out = fft_inverse(correct_spectrum(fft_forward(pred), target, mask));
  out.set_precision(pred.precision());
  return out;
}

/// Equivalent closed form of `correct_field`: a uniform shift by
/// (target c0 - mean) on each masked channel. Used inside training loops.
inline void apply_zero_mode_shift(GridField& pred, const ConservedQuantity& target,
                                  const ConservationMask& mask) {
  detail::check_correction_args(pred.grid(), pred.channels(), target, mask,
                                "apply_zero_mode_shift");
  for (std::size_t c = 0; c < pred.channels(); ++c) {
    if (!mask[c]) continue;
    const double shift = target.zero_mode[c] - channel_mean(pred, c);
    for (double& v : pred.channel(c)) v += shift;
  }
}

/// Squared L2 error split into the zero-mode term and the sum over all other
/// modes; both terms are already multiplied by L^m, so total = zero + rest.
struct ErrorDecomposition {
  std::vector<double> zero_mode;  // per channel
  std::vector<double> nonzero_modes;
  std::vector<double> total;

  double zero_mode_sum() const { return sum(zero_mode); }
  double nonzero_modes_sum() const { return sum(nonzero_modes); }
  double total_sum() const { return sum(total); }

 private:
  static double sum(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
};

inline ErrorDecomposition error_decomposition(const GridField& pred,
                                              const GridField& truth) {
  require_same_shape(pred, truth, "error_decomposition");
  const Spectrum ps = fft_forward(pred);
  const Spectrum ts = fft_forward(truth);
  const double volume = pred.grid().domain_volume();
  ErrorDecomposition d;
  for (std::size_t c = 0; c < pred.channels(); ++c) {
    auto a = ps.channel(c);
    auto b = ts.channel(c);
    const double zero = std::norm(a[0] - b[0]);
    double rest = 0.0;
    for (std::size_t k = 1; k < a.size(); ++k) rest += std::norm(a[k] - b[k]);
    d.zero_mode.push_back(volume * zero);
    d.nonzero_modes.push_back(volume * rest);
    d.total.push_back(volume * (zero + rest));
  }
  return d;
}

/// Outcome of correcting `pred` with the conserved quantity of `input` and
/// measuring against `truth`.
struct ErrorReductionCheck {
  double err_before = 0.0;
  double err_after = 0.0;
  /// mean(input) == mean(truth) on every masked channel (within tolerance).
  bool premise_holds = false;
  /// err_after <= err_before (within tolerance).
  bool bound_holds = false;
  /// mean(pred) == mean(truth) on every masked channel: no reduction possible.
  bool equality = false;
};

inline double l2_distance(const GridField& a, const GridField& b) {
  require_same_shape(a, b, "l2_distance");
  const double cv = a.grid().cell_volume();
  double s = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t k = 0; k < av.size(); ++k) {
    const double d = av[k] - bv[k];
    s += d * d;
  }
  return std::sqrt(cv * s);
}

inline ErrorReductionCheck check_error_reduction(const GridField& pred,
                                                 const GridField& truth,
                                                 const GridField& input,
                                                 const ConservationMask& mask,
                                                 double tolerance = 1e-12) {
  require_same_shape(pred, truth, "check_error_reduction");
  require_same_shape(pred, input, "check_error_reduction");
  const ConservedQuantity target = encode_conserved(input, mask);
  const GridField corrected = correct_field(pred, target, mask);
  ErrorReductionCheck r;
  r.err_before = l2_distance(pred, truth);
  r.err_after = l2_distance(corrected, truth);
  r.premise_holds = true;
  r.equality = true;
  for (std::size_t c = 0; c < pred.channels(); ++c) {
    if (!mask[c]) continue;
    const double truth_mean = channel_mean(truth, c);
    if (std::abs(channel_mean(input, c) - truth_mean) > tolerance)
      r.premise_holds = false;
    if (std::abs(channel_mean(pred, c) - truth_mean) > tolerance)
      r.equality = false;
  }
  r.bound_holds =
      r.err_after <= r.err_before + tolerance * std::max(1.0, r.err_before);
  return r;
}

}  // namespace ecf
