#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ecf/error.hpp"
#include "ecf/nn/model.hpp"

namespace ecf::nn {

struct AdamWParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

struct OptimState {
  AdamWParams hyper;
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  static OptimState for_model(const OperatorModel& model, AdamWParams hyper = {}) {
    return {hyper, std::vector<double>(model.params.size(), 0.0),
            std::vector<double>(model.params.size(), 0.0), 0};
  }
};

/// One AdamW step with decoupled weight decay (decay applied to every
/// parameter before the moment update, as in torch.optim.AdamW).
inline void adamw_step(OperatorModel& model, std::span<const double> grad, OptimState& opt) {
  const std::size_t n = model.params.size();
  require(grad.size() == n && opt.m.size() == n && opt.v.size() == n,
          ErrorCode::kShapeMismatch, "adamw_step: gradient/state size mismatch");
  for (std::size_t k = 0; k < n; ++k)
    if (!std::isfinite(grad[k]))
      fail(ErrorCode::kNonFinite,
           "adamw_step: non-finite gradient at parameter " + std::to_string(k));
  const AdamWParams& h = opt.hyper;
  opt.step += 1;
  const double t = static_cast<double>(opt.step);
  const double bc1 = 1.0 - std::pow(h.beta1, t);
  const double bc2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t k = 0; k < n; ++k) {
    double& p = model.params[k];
    p *= 1.0 - h.lr * h.weight_decay;
    opt.m[k] = h.beta1 * opt.m[k] + (1.0 - h.beta1) * grad[k];
    opt.v[k] = h.beta2 * opt.v[k] + (1.0 - h.beta2) * grad[k] * grad[k];
    const double mhat = opt.m[k] / bc1;
    const double vhat = opt.v[k] / bc2;
    p -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
  }
}

}  // namespace ecf::nn
