#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "lht/diffcore.hpp"
#include "lht/hierarchy.hpp"

namespace lht {

/// Which prediction structure the network uses.
///
///   Vanilla        one head on level 1; coarse levels are the parents of
///                  the argmax fine class (not trained).
///   VanillaSingle  K independent heads, head k on embedding slice k.
///   LhtF2C         level-1 head, then p^k = T^k(x) p^{k-1} upward.
///   LhtC2F         level-K head, then p^k = T(x) p^{k+1} downward.
///   LhtNaive       level-1 head, then p^k = Tnaive^k p^{k-1} (fixed 0/1).
enum class Mode { Vanilla, VanillaSingle, LhtF2C, LhtC2F, LhtNaive };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);
bool has_transitions(Mode mode);
/// True for modes whose transition matrices carry trainable parameters.
bool has_learned_transitions(Mode mode);

/// What each transition head consumes: its own embedding slice, or the whole
/// embedding.
enum class TransitionInput { Slice, Full };

std::string_view to_string(TransitionInput input);
TransitionInput parse_transition_input(std::string_view text);

struct ModelConfig {
  std::size_t input_dim = 16;
  std::size_t hidden_dim = 64;
  /// Must be divisible by the number of levels.
  std::size_t embed_dim = 60;
  Mode mode = Mode::LhtF2C;
  TransitionInput transition_input = TransitionInput::Slice;
};

/// Per-level predictions for one input. probs[i] is the distribution over
/// level i + 1. transitions[i] links levels i + 1 and i + 2: it is
/// C_{i+2} x C_{i+1} for f2c/naive (maps level i+1 up to i+2) and
/// C_{i+1} x C_{i+2} for c2f (maps level i+2 down to i+1). Vanilla modes
/// carry no transitions.
struct PredictionChain {
  std::vector<Tensor> probs;
  std::vector<Tensor> transitions;
};

/// Same layout as PredictionChain, as tape variables.
struct TapeChain {
  std::vector<Var> probs;
  std::vector<Var> transitions;
};

class LhtModel {
 public:
  /// Builds and initialises all parameters for `config.mode`. Weights are
  /// uniform in +-1/sqrt(fan_in), biases zero.
  LhtModel(LabelHierarchy hierarchy, ModelConfig config, std::uint64_t seed);

  const LabelHierarchy& hierarchy() const noexcept { return hierarchy_; }
  const ModelConfig& config() const noexcept { return config_; }
  Mode mode() const noexcept { return config_.mode; }
  std::size_t num_levels() const noexcept { return hierarchy_.num_levels(); }

  const ParameterSet& params() const noexcept { return params_; }
  ParameterSet& params() noexcept { return params_; }

  /// Records the forward pass for the model's mode. The tape must have been
  /// constructed over params().
  TapeChain forward(Tape& tape, const Tensor& x) const;

  /// Value-only forward pass for the model's mode.
  PredictionChain predict(const Tensor& x) const;

  /// Mode-checked entry points (ModeMismatch otherwise).
  PredictionChain forward_f2c(const Tensor& x) const;
  PredictionChain forward_c2f(const Tensor& x) const;
  PredictionChain forward_vanilla(const Tensor& x) const;

  /// Parameter ids, exposed for tests that need to reach specific weights.
  struct Affine {
    ParamId weight = 0;
    ParamId bias = 0;
  };
  const std::vector<Affine>& backbone_layers() const noexcept { return backbone_; }
  /// Level-indexed heads: classifier heads (one for vanilla/f2c/naive/c2f, K
  /// for vanilla_single) keyed by the 0-based level they predict.
  const std::vector<std::pair<std::size_t, Affine>>& class_heads() const noexcept {
    return class_heads_;
  }
  /// Transition heads, index i producing transitions[i].
  const std::vector<Affine>& transition_heads() const noexcept { return transition_heads_; }

 private:
  Var embed(Tape& tape, const Tensor& x) const;
  Var slice_for_level(Tape& tape, Var embedding, std::size_t level0) const;
  Var transition_input(Tape& tape, Var embedding, std::size_t level0) const;
  Var apply(Tape& tape, Var input, const Affine& layer) const;

  Affine make_affine(const std::string& name, ParamGroup group, std::size_t out, std::size_t in,
                     std::mt19937_64& rng);

  LabelHierarchy hierarchy_;
  ModelConfig config_;
  ParameterSet params_;
  std::vector<Affine> backbone_;
  std::vector<std::pair<std::size_t, Affine>> class_heads_;
  std::vector<Affine> transition_heads_;
  std::vector<Tensor> naive_;
};

/// Checkpoint: versioned JSON with mode, shapes, every parameter array and
/// the hierarchy fingerprint. Doubles are written in shortest round-trip
/// form, so save/load is bit exact.
void save_checkpoint(const LhtModel& model, const std::filesystem::path& path);
std::string checkpoint_to_json(const LhtModel& model);
/// HierarchyMismatch if the stored fingerprint differs from `hierarchy`.
LhtModel load_checkpoint(const std::filesystem::path& path, const LabelHierarchy& hierarchy);
LhtModel checkpoint_from_json(const std::string& text, const LabelHierarchy& hierarchy);

}  // namespace lht
