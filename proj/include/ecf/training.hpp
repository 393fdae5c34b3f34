#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "ecf/conservation.hpp"
#include "ecf/dataset.hpp"
#include "ecf/error.hpp"
#include "ecf/metrics.hpp"
#include "ecf/nn/adamw.hpp"
#include "ecf/nn/loss.hpp"
#include "ecf/nn/model.hpp"
#include "ecf/parallel.hpp"

namespace ecf {

enum class TrainMode { kBaseline, kIntegrated, kStaged };

inline std::string_view to_string(TrainMode m) {
  switch (m) {
    case TrainMode::kBaseline: return "baseline";
    case TrainMode::kIntegrated: return "ecf_i";
    case TrainMode::kStaged: return "ecf_s";
  }
  return "?";
}

inline TrainMode parse_train_mode(std::string_view s) {
  if (s == "baseline") return TrainMode::kBaseline;
  if (s == "ecf_i") return TrainMode::kIntegrated;
  if (s == "ecf_s") return TrainMode::kStaged;
  fail(ErrorCode::kInvalidArgument,
       "unknown training mode '" + std::string(s) + "' (baseline|ecf_i|ecf_s)");
}

enum class RolloutCorrection { kOff, kEveryStepFeedback, kPostHocPerStep };

inline std::string_view to_string(RolloutCorrection c) {
  switch (c) {
    case RolloutCorrection::kOff: return "off";
    case RolloutCorrection::kEveryStepFeedback: return "feedback";
    case RolloutCorrection::kPostHocPerStep: return "posthoc";
  }
  return "?";
}

inline RolloutCorrection parse_rollout_correction(std::string_view s) {
  if (s == "off") return RolloutCorrection::kOff;
  if (s == "feedback") return RolloutCorrection::kEveryStepFeedback;
  if (s == "posthoc") return RolloutCorrection::kPostHocPerStep;
  fail(ErrorCode::kInvalidArgument,
       "unknown correction '" + std::string(s) + "' (off|feedback|posthoc)");
}

/// Evaluation pairing: integrated models roll out with feedback, staged
/// models with post-hoc correction, baselines uncorrected.
inline RolloutCorrection default_correction(TrainMode m) {
  switch (m) {
    case TrainMode::kIntegrated: return RolloutCorrection::kEveryStepFeedback;
    case TrainMode::kStaged: return RolloutCorrection::kPostHocPerStep;
    default: return RolloutCorrection::kOff;
  }
}

struct TrainConfig {
  TrainMode mode = TrainMode::kBaseline;
  std::size_t epochs = 200;
  std::size_t batch_size = 5;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  nn::LossKind loss = nn::LossKind::kMae;
  std::uint64_t seed = 0;
  std::size_t eval_every = 50;

  void validate(std::size_t train_size) const {
    require(epochs >= 1, ErrorCode::kInvalidArgument, "epochs must be >= 1");
    require(batch_size >= 1 && batch_size <= train_size, ErrorCode::kInvalidArgument,
            "batch size " + std::to_string(batch_size) + " must be in [1, " +
                std::to_string(train_size) + "]");
    require(eval_every >= 1, ErrorCode::kInvalidArgument, "eval_every must be >= 1");
    require(lr >= 0.0 && weight_decay >= 0.0, ErrorCode::kInvalidArgument,
            "lr and weight decay must be nonnegative");
  }
};

struct TrainingPair {
  std::size_t sample = 0;
  std::size_t t = 0;  // input snapshot; target is t + 1
  bool operator==(const TrainingPair&) const = default;
};

/// One adjacent pair per training sample, shuffled. Deterministic in
/// (seed, epoch).
inline std::vector<TrainingPair> sample_training_pairs(const TrajectoryDataset& ds,
                                                       std::uint64_t seed, std::size_t epoch) {
  require(ds.size() >= 1 && ds.snapshots() >= 2, ErrorCode::kInvalidArgument,
          "training needs at least one sample with two snapshots");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch)};
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<std::size_t> pick(0, ds.snapshots() - 2);
  std::vector<TrainingPair> pairs(ds.size());
  for (std::size_t s = 0; s < ds.size(); ++s) pairs[s] = {s, pick(rng)};
  std::shuffle(pairs.begin(), pairs.end(), rng);
  return pairs;
}

struct RolloutResult {
  std::vector<GridField> frames;         // predicted frames 1 .. n_steps
  std::vector<double> rmse;              // per step, filled by score_rollout
  std::vector<double> conservation;      // per step, filled by score_rollout
  std::vector<std::string> warnings;
  double seconds = 0.0;
};

/// Autoregressive prediction from `initial` only. The correction target is
/// the zero mode of the initial state.
inline RolloutResult rollout(const nn::OperatorModel& model, const GridField& initial,
                             std::size_t n_steps, RolloutCorrection correction,
                             const ConservationMask& mask) {
  const auto start = std::chrono::steady_clock::now();
  RolloutResult out;
  if (n_steps == 0) return out;
  std::optional<ConservedQuantity> target;
  if (correction != RolloutCorrection::kOff) {
    mask.validate_for(initial.channels());
    target = encode_conserved(initial, mask);
  }
  GridField state = initial;
  for (std::size_t k = 1; k <= n_steps; ++k) {
    GridField next = nn::forward(model, state);
    for (double v : next.values())
      if (!std::isfinite(v))
        fail(ErrorCode::kNonFinite,
             "rollout step " + std::to_string(k) + " produced a non-finite state");
    if (correction == RolloutCorrection::kEveryStepFeedback)
      next = correct_field(next, *target, mask);
    out.frames.push_back(next);
    state = std::move(next);
  }
  if (correction == RolloutCorrection::kPostHocPerStep)
    for (auto& f : out.frames) f = correct_field(f, *target, mask);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

/// Fills per-step RMSE and relative conservation error against truth frames
/// 1 .. n_steps of `truth`.
inline void score_rollout(RolloutResult& r, const Trajectory& truth, const ConservationMask& mask) {
  require(truth.size() == r.frames.size() + 1, ErrorCode::kShapeMismatch,
          "score_rollout: truth has " + std::to_string(truth.size()) + " frames for " +
              std::to_string(r.frames.size()) + " predicted steps");
  r.rmse.clear();
  for (std::size_t k = 0; k < r.frames.size(); ++k) r.rmse.push_back(rmse(r.frames[k], truth[k + 1]));
  const std::vector<GridField> ref(truth.begin() + 1, truth.end());
  ConservationSeries cs = relative_conservation_error(r.frames, ref, mask);
  r.conservation = std::move(cs.error);
  r.warnings = std::move(cs.warnings);
}

/// Rolls out every sample of `ds` from its first snapshot and scores it.
/// Samples run in parallel; results keep dataset order.
inline std::vector<RolloutResult> evaluate(const nn::OperatorModel& model,
                                           const TrajectoryDataset& ds,
                                           RolloutCorrection correction, bool keep_frames = false) {
  require(ds.size() >= 1, ErrorCode::kInvalidArgument, "evaluation split is empty");
  require(model.config.channels == ds.channels(), ErrorCode::kShapeMismatch,
          "model has " + std::to_string(model.config.channels) + " channels, dataset has " +
              std::to_string(ds.channels()));
  std::vector<RolloutResult> out(ds.size());
  const ConservationMask mask = ds.mask();
  parallel_for(ds.size(), [&](std::size_t s) {
    const Trajectory& truth = ds.samples[s];
    out[s] = rollout(model, truth[0], truth.size() - 1, correction, mask);
    score_rollout(out[s], truth, mask);
    if (!keep_frames) out[s].frames.clear();
  });
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Mean over samples of the mean-over-steps rollout RMSE.
inline double validation_rmse(const nn::OperatorModel& model, const TrajectoryDataset& ds,
                              RolloutCorrection correction) {
  double s = 0.0;
  for (const auto& r : evaluate(model, ds, correction)) s += mean_of(r.rmse);
  return s / static_cast<double>(ds.size());
}

struct LogRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  std::optional<double> val_rmse;
};

inline std::string to_json_line(const LogRecord& r) {
  char buf[160];
  if (r.val_rmse)
    std::snprintf(buf, sizeof buf, "{\"epoch\":%zu,\"loss\":%.17g,\"val_rmse\":%.17g}", r.epoch,
                  r.loss, *r.val_rmse);
  else
    std::snprintf(buf, sizeof buf, "{\"epoch\":%zu,\"loss\":%.17g}", r.epoch, r.loss);
  return buf;
}

struct TrainResult {
  nn::OperatorModel model;  // best checkpoint
  std::vector<LogRecord> log;
  std::size_t best_epoch = 0;
  double best_val_rmse = 0.0;
};

/// Trains from `initial`. Baseline and staged runs take the same path (the
/// correction is inactive during training in both); integrated runs put the
/// correction inside the loss and validate with feedback rollouts. The
/// checkpoint with the lowest validation RMSE is kept; without a validation
/// split the final weights are returned. `on_epoch` sees every log record as
/// soon as it exists, so a caller can keep the log of a run that diverges.
inline TrainResult train(const TrajectoryDataset& train_ds, const TrajectoryDataset* valid_ds,
                         nn::OperatorModel initial, const TrainConfig& cfg,
                         const std::function<void(const LogRecord&)>& on_epoch = {}) {
  cfg.validate(train_ds.size());
  require(initial.config.channels == train_ds.channels(), ErrorCode::kShapeMismatch,
          "model/dataset channel mismatch");
  const bool integrated = cfg.mode == TrainMode::kIntegrated;
  const RolloutCorrection val_mode =
      integrated ? RolloutCorrection::kEveryStepFeedback : RolloutCorrection::kOff;
  const ConservationMask mask = train_ds.mask();

  TrainResult result{initial, {}, 0, 0.0};
  nn::OperatorModel model = std::move(initial);
  nn::OptimState opt =
      nn::OptimState::for_model(model, {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  bool have_best = false;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto pairs = sample_training_pairs(train_ds, cfg.seed, epoch);
    double loss_sum = 0.0;
    for (std::size_t b0 = 0; b0 < pairs.size(); b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(pairs.size(), b0 + cfg.batch_size);
      std::vector<GridField> in, out;
      nn::InLoopCorrection corr{mask, {}};
      for (std::size_t b = b0; b < b1; ++b) {
        const Trajectory& traj = train_ds.samples[pairs[b].sample];
        in.push_back(traj[pairs[b].t]);
        out.push_back(traj[pairs[b].t + 1]);
        if (integrated) corr.targets.push_back(encode_conserved(in.back(), mask));
      }
      nn::LossValue lv;
      try {
        lv = nn::loss_and_grad(model, in, out, cfg.loss, integrated ? &corr : nullptr);
      } catch (const Error& e) {
        fail(e.code(), "training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      nn::adamw_step(model, lv.grad, opt);
      loss_sum += lv.loss * static_cast<double>(b1 - b0);
    }
    LogRecord rec{epoch, loss_sum / static_cast<double>(pairs.size()), std::nullopt};
    require(std::isfinite(rec.loss), ErrorCode::kNonFinite,
            "training diverged at epoch " + std::to_string(epoch));
    if (valid_ds && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs)) {
      const double v = validation_rmse(model, *valid_ds, val_mode);
      rec.val_rmse = v;
      if (!have_best || v < result.best_val_rmse) {
        have_best = true;
        result.best_val_rmse = v;
        result.best_epoch = epoch;
        result.model = model;
      }
    }
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if (!valid_ds) {
    result.model = model;
    result.best_epoch = cfg.epochs;
  }
  return result;
}

}  // namespace ecf
