#pragma once

#include <fftw3.h>

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "ecf/error.hpp"
#include "ecf/grid.hpp"

namespace ecf {

using Complex = std::complex<double>;

namespace detail {

enum class TransformKind {
  kForward,
  kBackward,
  kCosineForward,
  kCosineBackward,
  kRealForward,
  kRealBackward
};

/// Entries of a real-input transform: the last axis keeps n/2 + 1 modes.
inline std::size_t half_spectrum_size(const GridSpec& grid) {
  return grid.dims == 1 ? grid.resolution[0] / 2 + 1
                        : grid.resolution[0] * (grid.resolution[1] / 2 + 1);
}

/// Process-wide FFTW plan cache. Planning is serialized; executing a cached
/// plan through the new-array interface is thread safe.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(const GridSpec& grid, TransformKind kind) {
    const Key key{grid.dims, grid.resolution[0], grid.resolution[1], kind};
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    fftw_plan plan = make(grid, kind);
    require(plan != nullptr, ErrorCode::kNumerical, "FFTW planning failed");
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  using Key = std::tuple<int, std::size_t, std::size_t, TransformKind>;

  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  static fftw_plan make(const GridSpec& grid, TransformKind kind) {
    const int rank = grid.dims;
    const int n[2] = {static_cast<int>(grid.resolution[0]),
                      static_cast<int>(grid.resolution[1])};
    const std::size_t total = grid.points();
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    if (kind == TransformKind::kForward || kind == TransformKind::kBackward) {
      std::vector<Complex> in(total), out(total);
      return fftw_plan_dft(rank, n, reinterpret_cast<fftw_complex*>(in.data()),
                           reinterpret_cast<fftw_complex*>(out.data()),
                           kind == TransformKind::kForward ? FFTW_FORWARD
                                                           : FFTW_BACKWARD,
                           flags);
    }
    if (kind == TransformKind::kRealForward || kind == TransformKind::kRealBackward) {
      std::vector<double> real(total);
      std::vector<Complex> half(half_spectrum_size(grid));
      auto* h = reinterpret_cast<fftw_complex*>(half.data());
      return kind == TransformKind::kRealForward
                 ? fftw_plan_dft_r2c(rank, n, real.data(), h, flags)
                 : fftw_plan_dft_c2r(rank, n, h, real.data(), flags);
    }
    std::vector<double> in(total), out(total);
    const fftw_r2r_kind r2r =
        kind == TransformKind::kCosineForward ? FFTW_REDFT10 : FFTW_REDFT01;
    const fftw_r2r_kind kinds[2] = {r2r, r2r};
    return fftw_plan_r2r(rank, n, in.data(), out.data(), kinds, flags);
  }

  std::mutex mutex_;
  std::map<Key, fftw_plan> plans_;
};

/// Unnormalized complex DFT over the grid's axes.
/// sign < 0: out_k = sum_x in_x exp(-2 pi i k.x / N); sign > 0: exp(+...).
inline void dft(std::span<const Complex> in, std::span<Complex> out,
                const GridSpec& grid, int sign) {
  fftw_plan plan = PlanCache::instance().get(
      grid, sign < 0 ? TransformKind::kForward : TransformKind::kBackward);
  // FFTW does not modify the input of an out-of-place complex transform.
  fftw_execute_dft(plan,
                   reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in.data())),
                   reinterpret_cast<fftw_complex*>(out.data()));
}

/// Unnormalized real-to-half-spectrum DFT (sign -1).
inline void real_dft(std::span<const double> in, std::span<Complex> half, const GridSpec& grid) {
  fftw_plan plan = PlanCache::instance().get(grid, TransformKind::kRealForward);
  fftw_execute_dft_r2c(plan, const_cast<double*>(in.data()),
                       reinterpret_cast<fftw_complex*>(half.data()));
}

/// Unnormalized inverse of `real_dft` (sign +1) for a Hermitian spectrum
/// given by its half. Overwrites `half`.
inline void real_idft(std::span<Complex> half, std::span<double> out, const GridSpec& grid) {
  fftw_plan plan = PlanCache::instance().get(grid, TransformKind::kRealBackward);
  fftw_execute_dft_c2r(plan, reinterpret_cast<fftw_complex*>(half.data()), out.data());
}

/// Unnormalized DCT-II (forward = true) or DCT-III along every active axis,
/// in FFTW's REDFT10 / REDFT01 conventions. DCT-III(DCT-II(x)) = (2N)^m x.
inline void cosine_transform(std::span<const double> in, std::span<double> out,
                             const GridSpec& grid, bool forward) {
  fftw_plan plan = PlanCache::instance().get(
      grid, forward ? TransformKind::kCosineForward
                    : TransformKind::kCosineBackward);
  // REDFT01 may overwrite its input for rank > 1, so always work on a copy.
  std::vector<double> scratch(in.begin(), in.end());
  fftw_execute_r2r(plan, scratch.data(), out.data());
}

}  // namespace detail

/// Signed frequency of storage index k on an axis of n points, in
/// (-n/2, n/2]. The Nyquist index of an even axis maps to +n/2.
inline int signed_frequency(std::size_t k, std::size_t n) {
  const auto kk = static_cast<long long>(k);
  const auto nn = static_cast<long long>(n);
  return static_cast<int>(2 * kk <= nn ? kk : kk - nn);
}

/// Storage index of signed frequency f on an axis of n points.
inline std::size_t wrap_frequency(int f, std::size_t n) {
  const auto nn = static_cast<long long>(n);
  long long k = static_cast<long long>(f) % nn;
  if (k < 0) k += nn;
  return static_cast<std::size_t>(k);
}

struct ModeIndex {
  std::array<int, 2> n{0, 0};

  static ModeIndex zero() { return {}; }
  bool is_zero() const { return n[0] == 0 && n[1] == 0; }
};

/// Full discrete spectrum of a multi-channel field, normalized so that the
/// zero mode equals the arithmetic mean:
///   c_n = (1/N) sum_x u(x) exp(-2 pi i n.x / N).
class Spectrum {
 public:
  Spectrum() = default;
  Spectrum(GridSpec grid, std::size_t channels)
      : grid_(grid), channels_(channels), coeffs_(channels * grid.points()) {}

  const GridSpec& grid() const { return grid_; }
  std::size_t channels() const { return channels_; }
  std::size_t points() const { return grid_.points(); }

  std::span<Complex> channel(std::size_t c) {
    return std::span<Complex>(coeffs_).subspan(c * points(), points());
  }
  std::span<const Complex> channel(std::size_t c) const {
    return std::span<const Complex>(coeffs_).subspan(c * points(), points());
  }
  std::span<Complex> coeffs() { return coeffs_; }
  std::span<const Complex> coeffs() const { return coeffs_; }

  std::size_t storage_index(const ModeIndex& mode) const {
    const std::size_t i = wrap_frequency(mode.n[0], grid_.resolution[0]);
    const std::size_t j =
        grid_.dims == 2 ? wrap_frequency(mode.n[1], grid_.resolution[1]) : 0;
    return grid_.index(i, j);
  }
  Complex& coeff(std::size_t c, const ModeIndex& mode) {
    return coeffs_[c * points() + storage_index(mode)];
  }
  Complex coeff(std::size_t c, const ModeIndex& mode) const {
    return coeffs_[c * points() + storage_index(mode)];
  }
  Complex zero_mode(std::size_t c) const { return coeffs_[c * points()]; }

  /// Storage index of -n for storage index k.
  std::size_t conjugate_index(std::size_t k) const {
    const std::size_t nx = grid_.resolution[0];
    const std::size_t ny = grid_.resolution[1];
    const std::size_t i = k / ny;
    const std::size_t j = k % ny;
    return grid_.index((nx - i) % nx, (ny - j) % ny);
  }

 private:
  GridSpec grid_{};
  std::size_t channels_ = 0;
  std::vector<Complex> coeffs_;
};

inline Spectrum fft_forward(const GridField& field) {
  field.check_finite("fft_forward input");
  const GridSpec& grid = field.grid();
  const std::size_t n = grid.points();
  const double scale = 1.0 / static_cast<double>(n);
  Spectrum spec(grid, field.channels());
  std::vector<Complex> buffer(n);
  for (std::size_t c = 0; c < field.channels(); ++c) {
    auto src = field.channel(c);
    for (std::size_t k = 0; k < n; ++k) buffer[k] = Complex(src[k], 0.0);
    auto dst = spec.channel(c);
    detail::dft(buffer, dst, grid, -1);
    for (Complex& z : dst) z *= scale;
  }
  return spec;
}

/// Largest conjugate-symmetry defect |c(-n) - conj(c(n))| relative to the
/// largest coefficient magnitude of the same channel (0 for a zero channel).
inline double conjugate_symmetry_defect(const Spectrum& spec) {
  double worst = 0.0;
  for (std::size_t c = 0; c < spec.channels(); ++c) {
    auto coeffs = spec.channel(c);
    double scale = 0.0;
    for (const Complex& z : coeffs) scale = std::max(scale, std::abs(z));
    if (scale == 0.0) continue;
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
      const Complex partner = coeffs[spec.conjugate_index(k)];
      worst = std::max(worst, std::abs(partner - std::conj(coeffs[k])) / scale);
    }
  }
  return worst;
}

inline constexpr double kSymmetryTolerance = 1e-10;

inline GridField fft_inverse(const Spectrum& spec) {
  const double defect = conjugate_symmetry_defect(spec);
  require(defect <= kSymmetryTolerance, ErrorCode::kNumerical,
          "fft_inverse: spectrum violates conjugate symmetry (relative defect " +
              std::to_string(defect) + ")");
  const GridSpec& grid = spec.grid();
  const std::size_t n = grid.points();
  GridField field(grid, spec.channels());
  std::vector<Complex> buffer(n);
  for (std::size_t c = 0; c < spec.channels(); ++c) {
    detail::dft(spec.channel(c), buffer, grid, +1);
    auto dst = field.channel(c);
    for (std::size_t k = 0; k < n; ++k) dst[k] = buffer[k].real();
  }
  return field;
}

/// Discrete L2 norm per channel: sqrt(cell_volume * sum u^2).
inline std::vector<double> l2_norm(const GridField& field) {
  field.check_finite("l2_norm input");
  std::vector<double> out(field.channels());
  const double cv = field.grid().cell_volume();
  for (std::size_t c = 0; c < field.channels(); ++c) {
    double s = 0.0;
    for (double v : field.channel(c)) s += v * v;
    out[c] = std::sqrt(cv * s);
  }
  return out;
}

/// L^m sum_n |c_n|^2 per channel (the spectral side of Parseval).
inline std::vector<double> spectral_energy(const Spectrum& spec) {
  std::vector<double> out(spec.channels());
  const double volume = spec.grid().domain_volume();
  for (std::size_t c = 0; c < spec.channels(); ++c) {
    double s = 0.0;
    for (const Complex& z : spec.channel(c)) s += std::norm(z);
    out[c] = volume * s;
  }
  return out;
}

}  // namespace ecf
