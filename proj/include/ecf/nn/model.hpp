#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ecf/error.hpp"
#include "ecf/fft.hpp"
#include "ecf/grid.hpp"

namespace ecf::nn {

/// Architecture of the spectral surrogate. The network maps a `channels`
/// field to a `channels` field:
///
///   v_0     = lift(u)                                  (pointwise, bias)
///   v_{l+1} = v_l + gelu(K_l v_l + W_l v_l + b_l)      l = 0 .. n_layers-1
///   out     = project(v_L)                             (pointwise, bias)
///
/// K_l is a bias-free spectral convolution acting on the low modes
/// |n_axis| < modes of each axis; all other modes are dropped.
struct OperatorConfig {
  std::size_t n_layers = 2;
  std::size_t width = 16;
  std::size_t modes = 8;
  std::size_t channels = 1;
  int dims = 2;
  std::uint64_t seed = 0;

  /// Retained modes per spectral layer, (2 modes - 1)^dims.
  std::size_t kept_modes() const {
    const std::size_t per_axis = 2 * modes - 1;
    return dims == 2 ? per_axis * per_axis : per_axis;
  }

  void validate() const {
    require(n_layers >= 1 && width >= 1 && modes >= 1 && channels >= 1,
            ErrorCode::kInvalidArgument, "operator config sizes must be positive");
    require(dims == 1 || dims == 2, ErrorCode::kUnsupported,
            "operator supports 1-D and 2-D grids");
  }

  bool operator==(const OperatorConfig&) const = default;
};

/// tanh through a single exp; agrees with std::tanh to a few ulp.
inline double fast_tanh(double a) {
  if (std::abs(a) < 0.125) return std::tanh(a);  // avoid cancellation near 0
  if (a > 20.0) return 1.0;
  if (a < -20.0) return -1.0;
  return 1.0 - 2.0 / (std::exp(2.0 * a) + 1.0);
}

/// GELU, tanh form: 0.5 z (1 + tanh(sqrt(2/pi) (z + 0.044715 z^3))).
inline double gelu(double z) {
  constexpr double c = 0.7978845608028654;  // sqrt(2 / pi)
  return 0.5 * z * (1.0 + fast_tanh(c * (z + 0.044715 * z * z * z)));
}

/// d gelu / dz, given t = tanh(sqrt(2/pi) (z + 0.044715 z^3)).
inline double gelu_derivative_from_tanh(double z, double t) {
  constexpr double c = 0.7978845608028654;
  return 0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * z * z);
}

inline double gelu_derivative(double z) {
  constexpr double c = 0.7978845608028654;
  return gelu_derivative_from_tanh(z, fast_tanh(c * (z + 0.044715 * z * z * z)));
}

struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Offsets of every named parameter block inside the flat vector.
///
/// Spectral weights of layer l are complex numbers stored as (re, im) pairs,
/// indexed ((out * width + in) * kept_modes + k).
class ParamLayout {
 public:
  explicit ParamLayout(const OperatorConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    const std::size_t w = cfg.width, d = cfg.channels, k = cfg.kept_modes();
    add("lift.weight", w * d);
    add("lift.bias", w);
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
      const std::string p = "layer" + std::to_string(l);
      add(p + ".spectral", 2 * w * w * k);
      add(p + ".pointwise.weight", w * w);
      add(p + ".pointwise.bias", w);
    }
    add("project.weight", d * w);
    add("project.bias", d);
  }

  std::size_t total() const { return total_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }

  std::size_t lift_weight() const { return blocks_[0].offset; }
  std::size_t lift_bias() const { return blocks_[1].offset; }
  std::size_t spectral(std::size_t l) const { return blocks_[2 + 3 * l].offset; }
  std::size_t pointwise_weight(std::size_t l) const { return blocks_[3 + 3 * l].offset; }
  std::size_t pointwise_bias(std::size_t l) const { return blocks_[4 + 3 * l].offset; }
  std::size_t project_weight() const { return blocks_[2 + 3 * cfg_.n_layers].offset; }
  std::size_t project_bias() const { return blocks_[3 + 3 * cfg_.n_layers].offset; }

 private:
  void add(std::string name, std::size_t size) {
    blocks_.push_back({std::move(name), total_, size});
    total_ += size;
  }

  OperatorConfig cfg_;
  std::vector<ParamBlock> blocks_;
  std::size_t total_ = 0;
};

/// Parameter vector split into named blocks.
using NamedParams = std::vector<std::pair<std::string, std::vector<double>>>;

struct OperatorModel {
  OperatorConfig config;
  std::vector<double> params;

  ParamLayout layout() const { return ParamLayout(config); }

  NamedParams unpack() const {
    NamedParams out;
    const ParamLayout l = layout();
    for (const auto& b : l.blocks())
      out.emplace_back(b.name, std::vector<double>(params.begin() + b.offset,
                                                   params.begin() + b.offset + b.size));
    return out;
  }

  static OperatorModel pack(const OperatorConfig& cfg, const NamedParams& named) {
    OperatorModel m{cfg, {}};
    const ParamLayout layout(cfg);
    require(named.size() == layout.blocks().size(), ErrorCode::kShapeMismatch,
            "pack: block count mismatch");
    for (std::size_t b = 0; b < named.size(); ++b) {
      require(named[b].first == layout.blocks()[b].name &&
                  named[b].second.size() == layout.blocks()[b].size,
              ErrorCode::kShapeMismatch, "pack: block '" + named[b].first + "' mismatch");
      m.params.insert(m.params.end(), named[b].second.begin(), named[b].second.end());
    }
    return m;
  }
};

/// Random initialization, deterministic per config.seed. Pointwise weights
/// ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); spectral weights
/// (1 / (width * width)) (U[0,1) + i U[0,1)); biases zero.
inline OperatorModel init_model(const OperatorConfig& cfg) {
  const ParamLayout layout(cfg);
  OperatorModel m{cfg, std::vector<double>(layout.total(), 0.0)};
  std::mt19937_64 rng(cfg.seed);
  auto fill_uniform = [&](std::size_t offset, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    for (std::size_t k = 0; k < n; ++k) m.params[offset + k] = u(rng);
  };
  const double w = static_cast<double>(cfg.width);
  const double d = static_cast<double>(cfg.channels);
  fill_uniform(layout.lift_weight(), cfg.width * cfg.channels, -1.0 / std::sqrt(d),
               1.0 / std::sqrt(d));
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    fill_uniform(layout.spectral(l), 2 * cfg.width * cfg.width * cfg.kept_modes(), 0.0,
                 1.0 / (w * w));
    fill_uniform(layout.pointwise_weight(l), cfg.width * cfg.width, -1.0 / std::sqrt(w),
                 1.0 / std::sqrt(w));
  }
  fill_uniform(layout.project_weight(), cfg.channels * cfg.width, -1.0 / std::sqrt(w),
               1.0 / std::sqrt(w));
  return m;
}

/// Zeroes every hidden layer, leaving forward = project(lift(u)).
inline OperatorModel with_zero_layers(OperatorModel m) {
  const ParamLayout layout = m.layout();
  for (std::size_t l = 0; l < m.config.n_layers; ++l) {
    for (std::size_t b = 2 + 3 * l; b < 5 + 3 * l; ++b) {
      const auto& block = layout.blocks()[b];
      std::fill(m.params.begin() + block.offset, m.params.begin() + block.offset + block.size, 0.0);
    }
  }
  return m;
}

/// Hand-set weights making the network the identity map, plus a uniform
/// per-channel `bias` added by the projection.
inline OperatorModel identity_model(OperatorConfig cfg, double bias = 0.0) {
  require(cfg.width >= cfg.channels, ErrorCode::kInvalidArgument,
          "identity model needs width >= channels");
  const ParamLayout layout(cfg);
  OperatorModel m{cfg, std::vector<double>(layout.total(), 0.0)};
  for (std::size_t c = 0; c < cfg.channels; ++c) {
    m.params[layout.lift_weight() + c * cfg.channels + c] = 1.0;
    m.params[layout.project_weight() + c * cfg.width + c] = 1.0;
    m.params[layout.project_bias() + c] = bias;
  }
  return m;
}

namespace detail {

/// Where each retained mode lives in the half spectrum of a real transform.
/// Modes are ordered by (f_x, f_y) ascending over -(modes-1) .. modes-1;
/// on 1-D grids the only axis is the halved one.
struct KeptModes {
  std::vector<std::size_t> pos;  // half index of (f_x, f_y) when f_last >= 0, else npos
  std::vector<std::size_t> neg;  // half index of (-f_x, -f_y) when f_last <= 0, else npos
  std::size_t half_size = 0;
  std::size_t size() const { return pos.size(); }
};

inline constexpr std::size_t kNoIndex = static_cast<std::size_t>(-1);

inline KeptModes kept_modes(const OperatorConfig& cfg, const GridSpec& grid) {
  require(grid.dims == cfg.dims, ErrorCode::kShapeMismatch,
          "operator dims do not match the grid");
  for (int a = 0; a < grid.dims; ++a) {
    require(2 * cfg.modes <= grid.resolution[a], ErrorCode::kInvalidArgument,
            "modes " + std::to_string(cfg.modes) + " exceed the Nyquist bound of a " +
                std::to_string(grid.resolution[a]) + "-point axis");
  }
  KeptModes km;
  km.half_size = ecf::detail::half_spectrum_size(grid);
  const int m = static_cast<int>(cfg.modes);
  auto add = [&](int fx, int fy) {
    if (grid.dims == 1) {
      km.pos.push_back(fx >= 0 ? static_cast<std::size_t>(fx) : kNoIndex);
      km.neg.push_back(fx <= 0 ? static_cast<std::size_t>(-fx) : kNoIndex);
      return;
    }
    const std::size_t nyh = grid.resolution[1] / 2 + 1;
    const std::size_t nx = grid.resolution[0];
    km.pos.push_back(fy >= 0 ? wrap_frequency(fx, nx) * nyh + static_cast<std::size_t>(fy)
                             : kNoIndex);
    km.neg.push_back(fy <= 0 ? wrap_frequency(-fx, nx) * nyh + static_cast<std::size_t>(-fy)
                             : kNoIndex);
  };
  for (int fx = -(m - 1); fx <= m - 1; ++fx) {
    if (grid.dims == 1) {
      add(fx, 0);
      continue;
    }
    for (int fy = -(m - 1); fy <= m - 1; ++fy) add(fx, fy);
  }
  return km;
}

/// Retained coefficients of a real signal from its half spectrum, times scale.
inline void gather_kept(const KeptModes& km, std::span<const Complex> half, double scale,
                        Complex* out) {
  for (std::size_t k = 0; k < km.size(); ++k)
    out[k] = km.pos[k] != kNoIndex ? half[km.pos[k]] * scale : std::conj(half[km.neg[k]]) * scale;
}

/// Half spectrum of the Hermitian part (Y + conj(Y(-k))) / 2 of a spectrum
/// supported on the retained modes, so that real_idft gives Re(B(Y)).
inline void scatter_kept(const KeptModes& km, const Complex* y, std::span<Complex> half) {
  std::fill(half.begin(), half.end(), Complex(0.0, 0.0));
  for (std::size_t k = 0; k < km.size(); ++k) {
    if (km.pos[k] != kNoIndex) half[km.pos[k]] += 0.5 * y[k];
    if (km.neg[k] != kNoIndex) half[km.neg[k]] += 0.5 * std::conj(y[k]);
  }
}

/// out[x] += sum_i a[i] * in_i[x] for rows in_i = in + i * n, four rows at a time.
inline void mix_rows(const double* a, std::size_t a_stride, const double* in, std::size_t rows,
                     std::size_t n, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= rows; i += 4) {
    const double a0 = a[i * a_stride], a1 = a[(i + 1) * a_stride], a2 = a[(i + 2) * a_stride],
                 a3 = a[(i + 3) * a_stride];
    const double *r0 = in + i * n, *r1 = r0 + n, *r2 = r1 + n, *r3 = r2 + n;
    for (std::size_t x = 0; x < n; ++x) out[x] += a0 * r0[x] + a1 * r1[x] + a2 * r2[x] + a3 * r3[x];
  }
  for (; i < rows; ++i) {
    const double ai = a[i * a_stride];
    const double* r = in + i * n;
    for (std::size_t x = 0; x < n; ++x) out[x] += ai * r[x];
  }
}

/// Dot product with four interleaved partial sums.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t x = 0;
  for (; x + 4 <= n; x += 4) {
    s0 += a[x] * b[x];
    s1 += a[x + 1] * b[x + 1];
    s2 += a[x + 2] * b[x + 2];
    s3 += a[x + 3] * b[x + 3];
  }
  for (; x < n; ++x) s0 += a[x] * b[x];
  return (s0 + s1) + (s2 + s3);
}

inline double sum(const double* a, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t x = 0;
  for (; x + 4 <= n; x += 4) {
    s0 += a[x];
    s1 += a[x + 1];
    s2 += a[x + 2];
    s3 += a[x + 3];
  }
  for (; x < n; ++x) s0 += a[x];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace detail

/// Intermediate activations kept by `forward` for the reverse pass.
struct ForwardTrace {
  std::vector<std::vector<double>> hidden;     // n_layers + 1 states, width x N
  std::vector<std::vector<double>> slope;      // n_layers, gelu'(z), width x N
  std::vector<std::vector<Complex>> low_modes; // n_layers, width x K (normalized)
  detail::KeptModes kept;
};

/// Applies the network. When `trace` is non-null it receives everything the
/// reverse pass needs.
inline GridField forward(const OperatorModel& model, const GridField& input,
                         ForwardTrace* trace = nullptr) {
  const OperatorConfig& cfg = model.config;
  require(input.channels() == cfg.channels, ErrorCode::kShapeMismatch,
          "forward: input has " + std::to_string(input.channels()) +
              " channels, model expects " + std::to_string(cfg.channels));
  require(model.params.size() == ParamLayout(cfg).total(), ErrorCode::kShapeMismatch,
          "forward: parameter vector does not match config");
  input.check_finite("forward input");
  const GridSpec& grid = input.grid();
  const detail::KeptModes kept = detail::kept_modes(cfg, grid);
  const ParamLayout layout(cfg);
  const std::size_t n = grid.points(), w = cfg.width, d = cfg.channels, nk = kept.size();
  const double* theta = model.params.data();
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<double> v(w * n, 0.0);
  for (std::size_t o = 0; o < w; ++o) {
    double* vo = v.data() + o * n;
    std::fill(vo, vo + n, theta[layout.lift_bias() + o]);
    detail::mix_rows(theta + layout.lift_weight() + o * d, 1, input.values().data(), d, n, vo);
  }
  if (trace) {
    trace->hidden.assign(1, v);
    trace->slope.clear();
    trace->low_modes.clear();
    trace->kept = kept;
  }

  std::vector<Complex> half(kept.half_size), xhat(w * nk), yk(nk);
  std::vector<double> z(w * n), slope;
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    for (std::size_t i = 0; i < w; ++i) {
      ecf::detail::real_dft(std::span<const double>(v.data() + i * n, n), half, grid);
      detail::gather_kept(kept, half, inv_n, xhat.data() + i * nk);
    }
    const double* wspec = theta + layout.spectral(l);
    const double* wpt = theta + layout.pointwise_weight(l);
    const double* bpt = theta + layout.pointwise_bias(l);
    for (std::size_t o = 0; o < w; ++o) {
      std::fill(yk.begin(), yk.end(), Complex(0.0, 0.0));
      for (std::size_t i = 0; i < w; ++i) {
        const double* wk = wspec + 2 * (o * w + i) * nk;
        const Complex* xi = xhat.data() + i * nk;
        for (std::size_t k = 0; k < nk; ++k) {
          const double ar = wk[2 * k], ai = wk[2 * k + 1];
          const double br = xi[k].real(), bi = xi[k].imag();
          yk[k] += Complex(ar * br - ai * bi, ar * bi + ai * br);
        }
      }
      detail::scatter_kept(kept, yk.data(), half);
      double* zo = z.data() + o * n;
      ecf::detail::real_idft(half, std::span<double>(zo, n), grid);
      for (std::size_t x = 0; x < n; ++x) zo[x] += bpt[o];
      detail::mix_rows(wpt + o * w, 1, v.data(), w, n, zo);
    }
    if (trace) {
      constexpr double c = 0.7978845608028654;
      slope.resize(w * n);
      for (std::size_t k = 0; k < w * n; ++k) {
        const double zk = z[k];
        const double t = fast_tanh(c * (zk + 0.044715 * zk * zk * zk));
        v[k] += 0.5 * zk * (1.0 + t);
        slope[k] = gelu_derivative_from_tanh(zk, t);
      }
      trace->slope.push_back(slope);
      trace->low_modes.push_back(xhat);
      trace->hidden.push_back(v);
    } else {
      for (std::size_t k = 0; k < w * n; ++k) v[k] += gelu(z[k]);
    }
  }

  GridField out(grid, d);
  for (std::size_t c = 0; c < d; ++c) {
    double* oc = out.channel(c).data();
    std::fill(oc, oc + n, theta[layout.project_bias() + c]);
    detail::mix_rows(theta + layout.project_weight() + c * w, 1, v.data(), w, n, oc);
  }
  return out;
}

/// Reverse pass: accumulates dL/dtheta into `grad` given dL/d(output).
inline void backward(const OperatorModel& model, const GridField& input,
                     const ForwardTrace& trace, const GridField& grad_output,
                     std::span<double> grad) {
  const OperatorConfig& cfg = model.config;
  const ParamLayout layout(cfg);
  require(grad.size() == layout.total(), ErrorCode::kShapeMismatch,
          "backward: gradient buffer has wrong size");
  const GridSpec& grid = input.grid();
  const std::size_t n = grid.points(), w = cfg.width, d = cfg.channels;
  const detail::KeptModes& kept = trace.kept;
  const std::size_t nk = kept.size();
  const double* theta = model.params.data();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double* gout = grad_output.values().data();

  std::vector<double> gv(w * n, 0.0);
  {
    const double* vl = trace.hidden.back().data();
    for (std::size_t c = 0; c < d; ++c) {
      const double* g = gout + c * n;
      grad[layout.project_bias() + c] += detail::sum(g, n);
      for (std::size_t i = 0; i < w; ++i)
        grad[layout.project_weight() + c * w + i] += detail::dot(g, vl + i * n, n);
    }
    for (std::size_t i = 0; i < w; ++i)
      detail::mix_rows(theta + layout.project_weight() + i, w, gout, d, n, gv.data() + i * n);
  }

  std::vector<double> gz(w * n), gnext(w * n), real(n);
  std::vector<Complex> half(kept.half_size), gy(w * nk), gx(nk);
  for (std::size_t l = cfg.n_layers; l-- > 0;) {
    const double* vl = trace.hidden[l].data();
    const std::vector<double>& sl = trace.slope[l];
    const std::vector<Complex>& xhat = trace.low_modes[l];
    for (std::size_t k = 0; k < w * n; ++k) gz[k] = gv[k] * sl[k];
    gnext = gv;  // residual branch

    const double* wpt = theta + layout.pointwise_weight(l);
    for (std::size_t o = 0; o < w; ++o) {
      const double* go = gz.data() + o * n;
      grad[layout.pointwise_bias(l) + o] += detail::sum(go, n);
      for (std::size_t i = 0; i < w; ++i)
        grad[layout.pointwise_weight(l) + o * w + i] += detail::dot(go, vl + i * n, n);
      // y_o = Re(B(Y_o))  =>  dL/dY_o = F(gz_o) restricted to kept modes.
      ecf::detail::real_dft(std::span<const double>(go, n), half, grid);
      detail::gather_kept(kept, half, 1.0, gy.data() + o * nk);
    }
    for (std::size_t i = 0; i < w; ++i)
      detail::mix_rows(wpt + i, w, gz.data(), w, n, gnext.data() + i * n);

    const double* wspec = theta + layout.spectral(l);
    double* gspec = grad.data() + layout.spectral(l);
    for (std::size_t i = 0; i < w; ++i) {
      std::fill(gx.begin(), gx.end(), Complex(0.0, 0.0));
      const Complex* xi = xhat.data() + i * nk;
      for (std::size_t o = 0; o < w; ++o) {
        const std::size_t base = 2 * (o * w + i) * nk;
        const Complex* go = gy.data() + o * nk;
        for (std::size_t k = 0; k < nk; ++k) {
          // dL/dW = conj(X) G_Y ; dL/dX += conj(W) G_Y
          const double gr = go[k].real(), gi = go[k].imag();
          const double xr = xi[k].real(), xim = xi[k].imag();
          gspec[base + 2 * k] += xr * gr + xim * gi;
          gspec[base + 2 * k + 1] += xr * gi - xim * gr;
          const double wr = wspec[base + 2 * k], wi = wspec[base + 2 * k + 1];
          gx[k] += Complex(wr * gr + wi * gi, wr * gi - wi * gr);
        }
      }
      // X = F(v)/N  =>  dL/dv = Re(B(G_X)) / N.
      detail::scatter_kept(kept, gx.data(), half);
      ecf::detail::real_idft(half, real, grid);
      double* gi = gnext.data() + i * n;
      for (std::size_t x = 0; x < n; ++x) gi[x] += real[x] * inv_n;
    }
    gv.swap(gnext);
  }

  for (std::size_t o = 0; o < w; ++o) {
    const double* go = gv.data() + o * n;
    grad[layout.lift_bias() + o] += detail::sum(go, n);
    for (std::size_t c = 0; c < d; ++c)
      grad[layout.lift_weight() + o * d + c] += detail::dot(go, input.values().data() + c * n, n);
  }
}

}  // namespace ecf::nn
