#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lht/data.hpp"
#include "lht/eval.hpp"
#include "lht/losses.hpp"
#include "lht/model.hpp"

namespace lht {

/// Training hyper-parameters. Momentum 0.9, weight decay 5e-4, lambda 2 and
/// the 10x head/backbone learning-rate ratio are the standard recipe; batch
/// size, step budget and network widths are desk-scale choices.
struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t max_steps = 1000;  // 80 epochs of the 800-sample benchmark
  double lr_backbone = 0.01;
  double lr_heads = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double lambda = kDefaultLambda;
  std::uint64_t seed = 0;
  Mode mode = Mode::LhtF2C;
  std::size_t eval_every = 0;  // 0 = never
  std::size_t hidden_dim = 64;
  std::size_t embed_dim = 60;
  TransitionInput transition_input = TransitionInput::Slice;
};

/// InvalidConfig / NegativeLambda on out-of-range fields.
void validate(const TrainConfig& config);

std::string config_to_json(const TrainConfig& config);
/// Overlays the keys present in `text` onto `base`. Unknown keys are a
/// ParseError.
TrainConfig config_from_json(const std::string& text, TrainConfig base = {});

/// ModelConfig implied by a training config and input dimension.
ModelConfig model_config(const TrainConfig& config, std::size_t input_dim);

/// lr0 * (1 + cos(pi * step / max_steps)) / 2; StepOutOfRange outside
/// [0, max_steps].
double cosine_lr(std::size_t step, std::size_t max_steps, double lr0);

struct OptimizerState {
  OptimizerState() = default;
  explicit OptimizerState(const ParameterSet& params);

  std::vector<Tensor> velocity;
  std::size_t step = 0;
};

struct GroupRates {
  double backbone = 0.0;
  double heads = 0.0;
  double for_group(ParamGroup g) const { return g == ParamGroup::Backbone ? backbone : heads; }
};

/// Heavy-ball step with coupled weight decay:
///   v <- momentum * v + g + weight_decay * p;  p <- p - lr * v.
void sgd_step(ParameterSet& params, const Gradients& grads, OptimizerState& state,
              double momentum, double weight_decay, const GroupRates& lr);
void sgd_step(ParameterSet& params, const Gradients& grads, OptimizerState& state,
              double momentum, double weight_decay, double lr);

struct HistoryRecord {
  std::size_t step = 0;
  double lr_backbone = 0.0;
  double lr_heads = 0.0;
  LossBreakdown loss;
};

struct EvalRecord {
  std::size_t step = 0;
  std::vector<double> acc;
  double avg_acc = 0.0;
};

struct TrainResult {
  LhtModel model;
  std::vector<HistoryRecord> history;
  std::vector<EvalRecord> evals;
};

/// Loss and gradient (of the per-sample mean) on one batch.
LossBreakdown batch_gradient(const LhtModel& model, const Dataset& data,
                             std::span<const std::size_t> indices, double lambda,
                             Gradients& grads);

/// Mini-batch momentum SGD with cosine-annealed per-group learning rates.
/// Batches are consecutive chunks of a fresh seeded permutation per epoch.
/// Bit-for-bit reproducible for a given (model, data, config).
/// NumericalError is rethrown with the failing step index.
TrainResult train(LhtModel model, const Dataset& train_set, const TrainConfig& config,
                  const Dataset* eval_set = nullptr,
                  const std::function<void(const HistoryRecord&)>& on_step = {});

std::string history_record_json(const HistoryRecord& record);

}  // namespace lht
