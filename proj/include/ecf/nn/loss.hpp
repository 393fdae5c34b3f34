#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecf/conservation.hpp"
#include "ecf/error.hpp"
#include "ecf/grid.hpp"
#include "ecf/nn/model.hpp"
#include "ecf/parallel.hpp"

namespace ecf::nn {

enum class LossKind { kMae, kMse };

inline std::string_view to_string(LossKind k) { return k == LossKind::kMae ? "mae" : "mse"; }

inline LossKind parse_loss(std::string_view s) {
  if (s == "mae") return LossKind::kMae;
  if (s == "mse") return LossKind::kMse;
  fail(ErrorCode::kInvalidArgument, "unknown loss '" + std::string(s) + "' (mae|mse)");
}

/// Correction placed inside the loss: prediction i is shifted so its masked
/// zero modes equal targets[i] before the loss is taken.
struct InLoopCorrection {
  ConservationMask mask;
  std::vector<ConservedQuantity> targets;
};

struct LossValue {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Loss of one prediction against one target and its gradient with respect
/// to the (uncorrected) prediction. `scale` multiplies both; pass
/// 1 / (batch entries) to get a batch mean.
///
/// With a correction the map is pred -> pred + (c0 - mean(pred)) on masked
/// channels, whose Jacobian is I - (1/N) 11^T, so the backward step removes
/// the channel mean from the gradient.
inline double prediction_loss(const GridField& pred, const GridField& target, LossKind kind,
                              const ConservedQuantity* correction_target,
                              const ConservationMask* mask, double scale,
                              GridField& grad_pred) {
  require_same_shape(pred, target, "loss");
  GridField p = pred;
  if (correction_target) apply_zero_mode_shift(p, *correction_target, *mask);
  grad_pred = GridField(pred.grid(), pred.channels());
  auto g = grad_pred.values();
  const auto pv = p.values();
  const auto tv = target.values();
  double sum = 0.0;
  for (std::size_t k = 0; k < pv.size(); ++k) {
    const double r = pv[k] - tv[k];
    if (kind == LossKind::kMae) {
      sum += std::abs(r);
      g[k] = scale * (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0));
    } else {
      sum += r * r;
      g[k] = scale * 2.0 * r;
    }
  }
  if (correction_target) {
    for (std::size_t c = 0; c < pred.channels(); ++c) {
      if (!(*mask)[c]) continue;
      const double m = channel_mean(grad_pred, c);
      for (double& v : grad_pred.channel(c)) v -= m;
    }
  }
  return scale * sum;
}

/// Mean loss over every entry of the batch and its exact gradient in theta.
/// Samples run in parallel; per-sample gradients are summed in batch order.
inline LossValue loss_and_grad(const OperatorModel& model, std::span<const GridField> inputs,
                               std::span<const GridField> targets, LossKind kind,
                               const InLoopCorrection* correction = nullptr) {
  require(!inputs.empty() && inputs.size() == targets.size(), ErrorCode::kShapeMismatch,
          "loss_and_grad: batch needs matching non-empty inputs and targets");
  if (correction) {
    require(correction->targets.size() == inputs.size(), ErrorCode::kShapeMismatch,
            "loss_and_grad: one correction target per sample required");
    correction->mask.validate_for(inputs[0].channels());
  }
  for (std::size_t b = 0; b < inputs.size(); ++b)
    require_same_shape(inputs[b], targets[b], "loss_and_grad sample " + std::to_string(b));

  const std::size_t total_params = model.params.size();
  const double scale =
      1.0 / static_cast<double>(inputs.size() * inputs[0].values().size());
  auto sample_grad = [&](std::size_t b, std::span<double> grad) {
    ForwardTrace trace;
    const GridField pred = forward(model, inputs[b], &trace);
    GridField g;
    const double loss = prediction_loss(pred, targets[b], kind,
                                        correction ? &correction->targets[b] : nullptr,
                                        correction ? &correction->mask : nullptr, scale, g);
    if (!std::isfinite(loss))
      fail(ErrorCode::kNonFinite, "non-finite loss at batch index " + std::to_string(b));
    backward(model, inputs[b], trace, g, grad);
    return loss;
  };

  // backward adds exactly once per parameter per sample, so summing
  // per-sample buffers in batch order and accumulating in place in batch
  // order give the same bits. The serial path skips the buffers.
  LossValue out{0.0, std::vector<double>(total_params, 0.0)};
  if (thread_count() <= 1 || inputs.size() == 1) {
    for (std::size_t b = 0; b < inputs.size(); ++b) out.loss += sample_grad(b, out.grad);
    return out;
  }
  std::vector<std::vector<double>> grads(inputs.size());
  std::vector<double> losses(inputs.size());
  parallel_for(inputs.size(), [&](std::size_t b) {
    grads[b].assign(total_params, 0.0);
    losses[b] = sample_grad(b, grads[b]);
  });
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    out.loss += losses[b];
    for (std::size_t k = 0; k < total_params; ++k) out.grad[k] += grads[b][k];
  }
  return out;
}

}  // namespace ecf::nn
