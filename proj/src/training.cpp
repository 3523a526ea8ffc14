#include "lht/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "json.hpp"

namespace lht {

void validate(const TrainConfig& c) {
  if (c.batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
  for (double rate : {c.lr_backbone, c.lr_heads, c.momentum, c.weight_decay}) {
    if (!(rate >= 0.0) || !std::isfinite(rate)) {
      throw Error(ErrorCode::InvalidConfig, "rates must be finite and >= 0");
    }
  }
  if (!(c.lambda >= 0.0)) {
    throw Error(ErrorCode::NegativeLambda, "lambda must be >= 0, got " + std::to_string(c.lambda));
  }
}

std::string config_to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["batch_size"] = c.batch_size;
  j["max_steps"] = c.max_steps;
  j["lr_backbone"] = c.lr_backbone;
  j["lr_heads"] = c.lr_heads;
  j["momentum"] = c.momentum;
  j["weight_decay"] = c.weight_decay;
  j["lambda"] = c.lambda;
  j["seed"] = c.seed;
  j["mode"] = std::string(to_string(c.mode));
  j["eval_every"] = c.eval_every;
  j["hidden_dim"] = c.hidden_dim;
  j["embed_dim"] = c.embed_dim;
  j["transition_input"] = std::string(to_string(c.transition_input));
  return j.dump(2) + "\n";
}

TrainConfig config_from_json(const std::string& text, TrainConfig c) {
  try {
    const auto j = nlohmann::json::parse(text);
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& key = it.key();
      const auto& v = it.value();
      if (key == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (key == "max_steps") c.max_steps = v.get<std::size_t>();
      else if (key == "lr_backbone") c.lr_backbone = v.get<double>();
      else if (key == "lr_heads") c.lr_heads = v.get<double>();
      else if (key == "momentum") c.momentum = v.get<double>();
      else if (key == "weight_decay") c.weight_decay = v.get<double>();
      else if (key == "lambda") c.lambda = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "mode") c.mode = parse_mode(v.get<std::string>());
      else if (key == "eval_every") c.eval_every = v.get<std::size_t>();
      else if (key == "hidden_dim") c.hidden_dim = v.get<std::size_t>();
      else if (key == "embed_dim") c.embed_dim = v.get<std::size_t>();
      else if (key == "transition_input") {
        c.transition_input = parse_transition_input(v.get<std::string>());
      } else {
        throw Error(ErrorCode::ParseError, "unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("config: ") + e.what());
  }
  return c;
}

ModelConfig model_config(const TrainConfig& config, std::size_t input_dim) {
  ModelConfig m;
  m.input_dim = input_dim;
  m.hidden_dim = config.hidden_dim;
  m.embed_dim = config.embed_dim;
  m.mode = config.mode;
  m.transition_input = config.transition_input;
  return m;
}

double cosine_lr(std::size_t step, std::size_t max_steps, double lr0) {
  if (max_steps == 0 || step > max_steps) {
    throw Error(ErrorCode::StepOutOfRange, "step " + std::to_string(step) + " of " +
                                               std::to_string(max_steps));
  }
  if (step == max_steps) return 0.0;
  const double t = static_cast<double>(step) / static_cast<double>(max_steps);
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

OptimizerState::OptimizerState(const ParameterSet& params) {
  velocity.reserve(params.size());
  for (const auto& p : params) velocity.emplace_back(p.value.rows(), p.value.cols());
}

void sgd_step(ParameterSet& params, const Gradients& grads, OptimizerState& state,
              double momentum, double weight_decay, const GroupRates& lr) {
  if (grads.size() != params.size() || state.velocity.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer buffers do not match parameters");
  }
  for (ParamId id = 0; id < params.size(); ++id) {
    Tensor& p = params[id].value;
    const Tensor& g = grads[id];
    Tensor& v = state.velocity[id];
    if (!p.same_shape(g) || !p.same_shape(v)) {
      throw Error(ErrorCode::ShapeMismatch, "gradient shape of " + params[id].name);
    }
    const double rate = lr.for_group(params[id].group);
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = momentum * v[i] + g[i] + weight_decay * p[i];
      p[i] -= rate * v[i];
    }
  }
  ++state.step;
}

void sgd_step(ParameterSet& params, const Gradients& grads, OptimizerState& state,
              double momentum, double weight_decay, double lr) {
  sgd_step(params, grads, state, momentum, weight_decay, GroupRates{lr, lr});
}

LossBreakdown batch_gradient(const LhtModel& model, const Dataset& data,
                             std::span<const std::size_t> indices, double lambda,
                             Gradients& grads) {
  const std::size_t k_levels = model.num_levels();
  const double inv_n = 1.0 / static_cast<double>(indices.size());
  CeTerms ce;
  ce.per_level.assign(k_levels, 0.0);
  ce.num_samples = indices.size();
  double conf = 0.0;
  const auto levels = supervised_levels(model.mode(), k_levels);
  Tape tape(&model.params());
  for (std::size_t idx : indices) {
    const Sample& s = data.samples[idx];
    tape.clear();
    const TapeChain chain = model.forward(tape, s.features);
    const SampleLoss loss = record_sample_loss(tape, chain, s.labels, model.mode(), lambda);
    for (std::size_t l = 0; l < k_levels; ++l) {
      if (levels[l]) ce.per_level[l] += tape.scalar(loss.ce_per_level[l]);
    }
    if (loss.has_conf) conf += tape.scalar(loss.conf);
    tape.backward(loss.total, grads, inv_n);
  }
  for (double v : ce.per_level) ce.total += v;
  return total_loss(ce, conf, lambda);
}

TrainResult train(LhtModel model, const Dataset& train_set, const TrainConfig& config,
                  const Dataset* eval_set,
                  const std::function<void(const HistoryRecord&)>& on_step) {
  validate(config);
  if (!model.hierarchy().same_structure(train_set.hierarchy)) {
    throw Error(ErrorCode::HierarchyMismatch, "model and training data use different hierarchies");
  }
  if (train_set.samples.empty()) throw Error(ErrorCode::InvalidConfig, "empty training set");
  if (model.mode() != config.mode) {
    throw Error(ErrorCode::ModeMismatch, "model mode differs from config mode");
  }

  TrainResult result{std::move(model), {}, {}};
  LhtModel& m = result.model;
  OptimizerState state(m.params());
  Gradients grads(m.params());

  std::mt19937_64 sampler(config.seed ^ 0x5eedba7c4e5ULL);
  std::vector<std::size_t> order(train_set.size());
  std::size_t cursor = order.size();
  std::vector<std::size_t> batch(config.batch_size);

  for (std::size_t step = 0; step < config.max_steps; ++step) {
    for (auto& slot : batch) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), sampler);
        cursor = 0;
      }
      slot = order[cursor++];
    }
    HistoryRecord record;
    record.step = step;
    record.lr_backbone = cosine_lr(step, config.max_steps, config.lr_backbone);
    record.lr_heads = cosine_lr(step, config.max_steps, config.lr_heads);
    try {
      grads.zero();
      record.loss = batch_gradient(m, train_set, batch, config.lambda, grads);
      sgd_step(m.params(), grads, state, config.momentum, config.weight_decay,
               GroupRates{record.lr_backbone, record.lr_heads});
      for (const auto& p : m.params()) require_finite(p.value, "sgd_step");
    } catch (const Error& e) {
      throw Error(e.code(), "step " + std::to_string(step) + ": " + e.what());
    }
    if (on_step) on_step(record);
    result.history.push_back(std::move(record));

    if (eval_set != nullptr && config.eval_every > 0 &&
        ((step + 1) % config.eval_every == 0 || step + 1 == config.max_steps)) {
      const auto report = evaluate(m, *eval_set);
      result.evals.push_back(EvalRecord{step + 1, report.acc, report.avg_acc});
    }
  }
  return result;
}

std::string history_record_json(const HistoryRecord& record) {
  auto j = nlohmann::ordered_json::parse(loss_record_json(record.step, record.loss));
  j["lr_backbone"] = record.lr_backbone;
  j["lr_heads"] = record.lr_heads;
  return j.dump();
}

}  // namespace lht
