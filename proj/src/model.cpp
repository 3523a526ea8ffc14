#include "lht/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace lht {

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::Vanilla: return "vanilla";
    case Mode::VanillaSingle: return "vanilla_single";
    case Mode::LhtF2C: return "lht_f2c";
    case Mode::LhtC2F: return "lht_c2f";
    case Mode::LhtNaive: return "lht_naive";
  }
  return "unknown";
}

Mode parse_mode(std::string_view text) {
  for (Mode m : {Mode::Vanilla, Mode::VanillaSingle, Mode::LhtF2C, Mode::LhtC2F, Mode::LhtNaive}) {
    if (to_string(m) == text) return m;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown mode '" + std::string(text) + "'");
}

bool has_transitions(Mode mode) {
  return mode == Mode::LhtF2C || mode == Mode::LhtC2F || mode == Mode::LhtNaive;
}

bool has_learned_transitions(Mode mode) { return mode == Mode::LhtF2C || mode == Mode::LhtC2F; }

std::string_view to_string(TransitionInput input) {
  return input == TransitionInput::Slice ? "slice" : "full";
}

TransitionInput parse_transition_input(std::string_view text) {
  if (text == "slice") return TransitionInput::Slice;
  if (text == "full") return TransitionInput::Full;
  throw Error(ErrorCode::InvalidConfig, "unknown transition_input '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------

LhtModel::LhtModel(LabelHierarchy hierarchy, ModelConfig config, std::uint64_t seed)
    : hierarchy_(std::move(hierarchy)), config_(config) {
  validate(hierarchy_);
  const std::size_t k_levels = hierarchy_.num_levels();
  const auto& sizes = hierarchy_.level_sizes();
  if (config_.input_dim == 0 || config_.hidden_dim == 0 || config_.embed_dim == 0) {
    throw Error(ErrorCode::InvalidConfig, "model dimensions must be positive");
  }
  if (config_.embed_dim % k_levels != 0) {
    throw Error(ErrorCode::InvalidConfig, "embed_dim " + std::to_string(config_.embed_dim) +
                                              " not divisible by " + std::to_string(k_levels) +
                                              " levels");
  }
  const std::size_t slice = config_.embed_dim / k_levels;
  const std::size_t t_in =
      config_.transition_input == TransitionInput::Slice ? slice : config_.embed_dim;

  std::mt19937_64 rng(seed);
  backbone_.push_back(make_affine("backbone.0", ParamGroup::Backbone, config_.hidden_dim,
                                  config_.input_dim, rng));
  backbone_.push_back(make_affine("backbone.1", ParamGroup::Backbone, config_.embed_dim,
                                  config_.hidden_dim, rng));

  auto add_class_head = [&](std::size_t level0) {
    class_heads_.emplace_back(
        level0, make_affine("head.level" + std::to_string(level0 + 1), ParamGroup::Head,
                            sizes[level0], slice, rng));
  };

  switch (config_.mode) {
    case Mode::Vanilla:
    case Mode::LhtNaive:
      add_class_head(0);
      break;
    case Mode::VanillaSingle:
      for (std::size_t l = 0; l < k_levels; ++l) add_class_head(l);
      break;
    case Mode::LhtF2C:
      add_class_head(0);
      for (std::size_t i = 0; i + 1 < k_levels; ++i) {
        transition_heads_.push_back(make_affine("transition." + std::to_string(i + 2),
                                                ParamGroup::Head, sizes[i + 1] * sizes[i], t_in,
                                                rng));
      }
      break;
    case Mode::LhtC2F:
      add_class_head(k_levels - 1);
      for (std::size_t i = 0; i + 1 < k_levels; ++i) {
        transition_heads_.push_back(make_affine("transition." + std::to_string(i + 1),
                                                ParamGroup::Head, sizes[i] * sizes[i + 1], t_in,
                                                rng));
      }
      break;
  }

  if (config_.mode == Mode::LhtNaive || config_.mode == Mode::Vanilla) {
    for (std::size_t level = 2; level <= k_levels; ++level) {
      naive_.push_back(naive_transition(hierarchy_, level).entries);
    }
  }
}

LhtModel::Affine LhtModel::make_affine(const std::string& name, ParamGroup group,
                                       std::size_t out, std::size_t in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor w(out, in);
  for (auto& v : w.values()) v = dist(rng);
  Affine layer;
  layer.weight = params_.add(name + ".weight", group, std::move(w));
  layer.bias = params_.add(name + ".bias", group, Tensor(out, 1));
  return layer;
}

Var LhtModel::apply(Tape& tape, Var input, const Affine& layer) const {
  return tape.affine(input, tape.parameter(layer.weight), tape.parameter(layer.bias));
}

Var LhtModel::embed(Tape& tape, const Tensor& x) const {
  if (!x.is_vector() || x.size() != config_.input_dim) {
    throw Error(ErrorCode::ShapeMismatch, "input has " + std::to_string(x.size()) +
                                              " features, model expects " +
                                              std::to_string(config_.input_dim));
  }
  Var h = tape.constant(x);
  for (const auto& layer : backbone_) h = tape.relu(apply(tape, h, layer));
  return h;
}

Var LhtModel::slice_for_level(Tape& tape, Var embedding, std::size_t level0) const {
  const std::size_t width = config_.embed_dim / num_levels();
  return tape.slice(embedding, level0 * width, width);
}

Var LhtModel::transition_input(Tape& tape, Var embedding, std::size_t level0) const {
  if (config_.transition_input == TransitionInput::Full) return embedding;
  return slice_for_level(tape, embedding, level0);
}

TapeChain LhtModel::forward(Tape& tape, const Tensor& x) const {
  const std::size_t k_levels = num_levels();
  const auto& sizes = hierarchy_.level_sizes();
  const Var e = embed(tape, x);
  TapeChain chain;
  chain.probs.resize(k_levels);

  auto class_probs = [&](const std::pair<std::size_t, Affine>& head) {
    return tape.softmax(apply(tape, slice_for_level(tape, e, head.first), head.second));
  };

  switch (config_.mode) {
    case Mode::Vanilla: {
      chain.probs[0] = class_probs(class_heads_.front());
      // Coarse levels follow the argmax fine class through the parent maps.
      const Tensor& fine = tape.value(chain.probs[0]);
      const auto best = static_cast<ClassIndex>(
          std::max_element(fine.values().begin(), fine.values().end()) - fine.values().begin());
      const LabelChain labels = backtrack(hierarchy_, best);
      for (std::size_t l = 1; l < k_levels; ++l) {
        chain.probs[l] = tape.constant(one_hot(sizes[l], labels[l]));
      }
      break;
    }
    case Mode::VanillaSingle:
      for (const auto& head : class_heads_) chain.probs[head.first] = class_probs(head);
      break;
    case Mode::LhtNaive:
      chain.probs[0] = class_probs(class_heads_.front());
      for (std::size_t i = 0; i + 1 < k_levels; ++i) {
        Var t = tape.constant(naive_[i]);
        chain.transitions.push_back(t);
        chain.probs[i + 1] = tape.matvec(t, chain.probs[i]);
      }
      break;
    case Mode::LhtF2C:
      chain.probs[0] = class_probs(class_heads_.front());
      for (std::size_t i = 0; i + 1 < k_levels; ++i) {
        Var logits = apply(tape, transition_input(tape, e, i + 1), transition_heads_[i]);
        Var t = tape.column_softmax(tape.reshape(logits, sizes[i + 1], sizes[i]));
        chain.transitions.push_back(t);
        chain.probs[i + 1] = tape.matvec(t, chain.probs[i]);
      }
      break;
    case Mode::LhtC2F: {
      chain.probs[k_levels - 1] = class_probs(class_heads_.front());
      chain.transitions.resize(k_levels - 1);
      for (std::size_t i = k_levels - 1; i-- > 0;) {
        Var logits = apply(tape, transition_input(tape, e, i), transition_heads_[i]);
        Var t = tape.column_softmax(tape.reshape(logits, sizes[i], sizes[i + 1]));
        chain.transitions[i] = t;
        chain.probs[i] = tape.matvec(t, chain.probs[i + 1]);
      }
      break;
    }
  }
  return chain;
}

PredictionChain LhtModel::predict(const Tensor& x) const {
  Tape tape(&params_);
  const TapeChain vars = forward(tape, x);
  PredictionChain out;
  for (Var v : vars.probs) out.probs.push_back(tape.value(v));
  for (Var v : vars.transitions) out.transitions.push_back(tape.value(v));
  return out;
}

PredictionChain LhtModel::forward_f2c(const Tensor& x) const {
  if (mode() != Mode::LhtF2C && mode() != Mode::LhtNaive) {
    throw Error(ErrorCode::ModeMismatch, "forward_f2c on a " + std::string(to_string(mode())) +
                                             " model");
  }
  return predict(x);
}

PredictionChain LhtModel::forward_c2f(const Tensor& x) const {
  if (mode() != Mode::LhtC2F) {
    throw Error(ErrorCode::ModeMismatch, "forward_c2f on a " + std::string(to_string(mode())) +
                                             " model");
  }
  return predict(x);
}

PredictionChain LhtModel::forward_vanilla(const Tensor& x) const {
  if (mode() != Mode::Vanilla && mode() != Mode::VanillaSingle) {
    throw Error(ErrorCode::ModeMismatch, "forward_vanilla on a " +
                                             std::string(to_string(mode())) + " model");
  }
  return predict(x);
}

// ---------------------------------------------------------------------------

namespace {

constexpr int kCheckpointVersion = 1;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string checkpoint_to_json(const LhtModel& model) {
  nlohmann::ordered_json j;
  j["format"] = "lht-checkpoint";
  j["version"] = kCheckpointVersion;
  j["mode"] = std::string(to_string(model.mode()));
  j["transition_input"] = std::string(to_string(model.config().transition_input));
  j["input_dim"] = model.config().input_dim;
  j["hidden_dim"] = model.config().hidden_dim;
  j["embed_dim"] = model.config().embed_dim;
  j["level_sizes"] = model.hierarchy().level_sizes();
  j["hierarchy_hash"] = hex64(model.hierarchy().structure_hash());
  auto params = nlohmann::ordered_json::array();
  for (const auto& p : model.params()) {
    nlohmann::ordered_json entry;
    entry["name"] = p.name;
    entry["rows"] = p.value.rows();
    entry["cols"] = p.value.cols();
    entry["values"] = p.value.storage();
    params.push_back(std::move(entry));
  }
  j["params"] = std::move(params);
  return j.dump() + "\n";
}

void save_checkpoint(const LhtModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << checkpoint_to_json(model);
}

LhtModel checkpoint_from_json(const std::string& text, const LabelHierarchy& hierarchy) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != "lht-checkpoint" ||
        j.at("version").get<int>() != kCheckpointVersion) {
      throw Error(ErrorCode::ParseError, "unsupported checkpoint format/version");
    }
    if (j.at("hierarchy_hash").get<std::string>() != hex64(hierarchy.structure_hash())) {
      throw Error(ErrorCode::HierarchyMismatch, "checkpoint was trained on another hierarchy");
    }
    ModelConfig config;
    config.mode = parse_mode(j.at("mode").get<std::string>());
    config.transition_input = parse_transition_input(j.at("transition_input").get<std::string>());
    config.input_dim = j.at("input_dim").get<std::size_t>();
    config.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    config.embed_dim = j.at("embed_dim").get<std::size_t>();
    LhtModel model(hierarchy, config, 0);
    const auto& stored = j.at("params");
    if (stored.size() != model.params().size()) {
      throw Error(ErrorCode::ParseError, "checkpoint parameter count mismatch");
    }
    for (std::size_t i = 0; i < stored.size(); ++i) {
      auto& param = model.params()[i];
      const auto& entry = stored[i];
      const auto rows = entry.at("rows").get<std::size_t>();
      const auto cols = entry.at("cols").get<std::size_t>();
      if (entry.at("name").get<std::string>() != param.name || rows != param.value.rows() ||
          cols != param.value.cols()) {
        throw Error(ErrorCode::ParseError, "checkpoint parameter '" + param.name +
                                               "' has unexpected name or shape");
      }
      param.value = Tensor::matrix(rows, cols, entry.at("values").get<std::vector<double>>());
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("checkpoint: ") + e.what());
  }
}

LhtModel load_checkpoint(const std::filesystem::path& path, const LabelHierarchy& hierarchy) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str(), hierarchy);
}

}  // namespace lht
