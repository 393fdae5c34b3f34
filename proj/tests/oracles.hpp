#pragma once

// Independent reference implementations used only by the test suites.

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "ecf/grid.hpp"
#include "ecf/nn/model.hpp"

namespace ecf::testing {

/// O(N^2) DFT of one channel, normalized so that entry 0 is the mean.
inline std::vector<std::complex<double>> brute_force_dft(const GridField& f,
                                                         std::size_t channel = 0) {
  const auto& g = f.grid();
  const std::size_t nx = g.resolution[0], ny = g.resolution[1];
  std::vector<std::complex<double>> out(nx * ny);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t a = 0; a < nx; ++a) {
    for (std::size_t b = 0; b < ny; ++b) {
      std::complex<double> s = 0.0;
      for (std::size_t i = 0; i < nx; ++i) {
        for (std::size_t j = 0; j < ny; ++j) {
          const double phase = -two_pi * (static_cast<double>(a * i) / nx +
                                          static_cast<double>(b * j) / ny);
          s += f.at(channel, i, j) * std::polar(1.0, phase);
        }
      }
      out[a * ny + b] = s / static_cast<double>(nx * ny);
    }
  }
  return out;
}

inline GridField random_field(const GridSpec& grid, std::size_t channels,
                              std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  GridField f(grid, channels);
  for (double& v : f.values()) v = u(rng);
  return f;
}

inline double max_abs_diff(const GridField& a, const GridField& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.values().size(); ++k)
    worst = std::max(worst, std::abs(a.values()[k] - b.values()[k]));
  return worst;
}

inline double direct_l2_squared(const GridField& a, const GridField& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.values().size(); ++k) {
    const double d = a.values()[k] - b.values()[k];
    s += d * d;
  }
  return s * a.grid().cell_volume();
}


/// Straight-line evaluation of the spectral network: explicit Fourier sums
/// over the retained modes, no FFT, no shared code with nn::forward beyond
/// the parameter layout.
inline GridField naive_forward(const nn::OperatorModel& model, const GridField& input) {
  const nn::OperatorConfig& cfg = model.config;
  const nn::ParamLayout layout(cfg);
  const GridSpec& g = input.grid();
  const std::size_t nx = g.resolution[0], ny = g.resolution[1], n = nx * ny;
  const std::size_t w = cfg.width, d = cfg.channels;
  const auto& th = model.params;
  const int m = static_cast<int>(cfg.modes);

  std::vector<std::pair<int, int>> freqs;
  for (int fx = -(m - 1); fx <= m - 1; ++fx) {
    if (g.dims == 1) {
      freqs.emplace_back(fx, 0);
      continue;
    }
    for (int fy = -(m - 1); fy <= m - 1; ++fy) freqs.emplace_back(fx, fy);
  }
  const std::size_t nk = freqs.size();
  std::vector<std::complex<double>> basis(nk * n);  // exp(+i k.x)
  for (std::size_t k = 0; k < nk; ++k)
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < ny; ++j) {
        const double phase = 2.0 * std::numbers::pi *
                             (freqs[k].first * static_cast<double>(i) / nx +
                              freqs[k].second * static_cast<double>(j) / ny);
        basis[k * n + i * ny + j] = std::polar(1.0, phase);
      }

  std::vector<std::vector<double>> v(w, std::vector<double>(n));
  for (std::size_t o = 0; o < w; ++o)
    for (std::size_t x = 0; x < n; ++x) {
      double s = th[layout.lift_bias() + o];
      for (std::size_t c = 0; c < d; ++c)
        s += th[layout.lift_weight() + o * d + c] * input.values()[c * n + x];
      v[o][x] = s;
    }

  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    std::vector<std::vector<std::complex<double>>> xh(w, std::vector<std::complex<double>>(nk));
    for (std::size_t i = 0; i < w; ++i)
      for (std::size_t k = 0; k < nk; ++k) {
        std::complex<double> s = 0.0;
        for (std::size_t x = 0; x < n; ++x) s += v[i][x] * std::conj(basis[k * n + x]);
        xh[i][k] = s / static_cast<double>(n);
      }
    std::vector<std::vector<double>> next = v;
    for (std::size_t o = 0; o < w; ++o) {
      std::vector<std::complex<double>> y(nk, 0.0);
      for (std::size_t i = 0; i < w; ++i)
        for (std::size_t k = 0; k < nk; ++k) {
          const std::size_t at = layout.spectral(l) + 2 * ((o * w + i) * nk + k);
          y[k] += std::complex<double>(th[at], th[at + 1]) * xh[i][k];
        }
      for (std::size_t x = 0; x < n; ++x) {
        std::complex<double> s = 0.0;
        for (std::size_t k = 0; k < nk; ++k) s += y[k] * basis[k * n + x];
        double z = s.real() + th[layout.pointwise_bias(l) + o];
        for (std::size_t i = 0; i < w; ++i)
          z += th[layout.pointwise_weight(l) + o * w + i] * v[i][x];
        next[o][x] += 0.5 * z * (1.0 + std::tanh(std::sqrt(2.0 / std::numbers::pi) *
                                                 (z + 0.044715 * z * z * z)));
      }
    }
    v = next;
  }

  GridField out(g, d);
  for (std::size_t c = 0; c < d; ++c)
    for (std::size_t x = 0; x < n; ++x) {
      double s = th[layout.project_bias() + c];
      for (std::size_t i = 0; i < w; ++i) s += th[layout.project_weight() + c * w + i] * v[i][x];
      out.values()[c * n + x] = s;
    }
  return out;
}

}  // namespace ecf::testing
