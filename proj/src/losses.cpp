#include "lht/losses.hpp"

#include <cmath>

#include "json.hpp"

namespace lht {

std::vector<bool> supervised_levels(Mode mode, std::size_t num_levels) {
  std::vector<bool> levels(num_levels, true);
  if (mode == Mode::Vanilla) {
    for (std::size_t l = 1; l < num_levels; ++l) levels[l] = false;
  }
  return levels;
}

CeTerms hierarchical_ce(std::span<const PredictionChain> chains,
                        std::span<const LabelChain> labels, const std::vector<bool>& levels) {
  if (chains.size() != labels.size()) {
    throw Error(ErrorCode::ShapeMismatch, std::to_string(chains.size()) + " predictions for " +
                                              std::to_string(labels.size()) + " labels");
  }
  CeTerms out;
  out.num_samples = chains.size();
  if (chains.empty()) return out;
  const std::size_t k_levels = chains.front().probs.size();
  if (!levels.empty() && levels.size() != k_levels) {
    throw Error(ErrorCode::ShapeMismatch, "level mask length");
  }
  out.per_level.assign(k_levels, 0.0);
  for (std::size_t i = 0; i < chains.size(); ++i) {
    const auto& probs = chains[i].probs;
    if (probs.size() != k_levels) {
      throw Error(ErrorCode::ShapeMismatch, "prediction chains have differing depth");
    }
    if (labels[i].size() != k_levels) {
      throw Error(ErrorCode::InvalidChain, "label chain of length " +
                                               std::to_string(labels[i].size()) + " for " +
                                               std::to_string(k_levels) + " levels");
    }
    for (std::size_t l = 0; l < k_levels; ++l) {
      if (!levels.empty() && !levels[l]) continue;
      if (labels[i][l] >= probs[l].size()) {
        throw Error(ErrorCode::InvalidChain, "label " + std::to_string(labels[i][l]) +
                                                 " out of range at level " +
                                                 std::to_string(l + 1));
      }
      out.per_level[l] += cross_entropy(probs[l], labels[i][l]);
    }
  }
  for (double v : out.per_level) out.total += v;
  return out;
}

double mean_column_neg_entropy(const Tensor& transition) {
  double acc = 0.0;
  Tensor column(transition.rows(), 1);
  for (std::size_t j = 0; j < transition.cols(); ++j) {
    for (std::size_t r = 0; r < transition.rows(); ++r) column[r] = transition(r, j);
    acc += neg_entropy(column);
  }
  return acc / static_cast<double>(transition.cols());
}

double confusion_loss(std::span<const PredictionChain> chains) {
  double total = 0.0;
  for (const auto& chain : chains) {
    if (chain.transitions.empty()) {
      throw Error(ErrorCode::ModeMismatch, "confusion loss needs transition matrices");
    }
    for (const auto& t : chain.transitions) total += mean_column_neg_entropy(t);
  }
  return total;
}

double total_loss(double ce, double conf, double lambda) {
  if (!(lambda >= 0.0)) {
    throw Error(ErrorCode::NegativeLambda, "lambda must be >= 0, got " + std::to_string(lambda));
  }
  return ce + lambda * conf;
}

LossBreakdown total_loss(const CeTerms& ce, double conf, double lambda) {
  LossBreakdown out;
  out.total = total_loss(ce.total, conf, lambda);
  out.lambda = lambda;
  out.ce_total = ce.total;
  out.conf_total = conf;
  out.num_samples = ce.num_samples;
  out.ce_per_level = ce.per_level;
  if (ce.num_samples > 0) {
    for (auto& v : out.ce_per_level) v /= static_cast<double>(ce.num_samples);
  }
  return out;
}

double confusion_lower_bound(const PredictionChain& chain) {
  double bound = 0.0;
  for (const auto& t : chain.transitions) bound -= std::log(static_cast<double>(t.rows()));
  return bound;
}

SampleLoss record_sample_loss(Tape& tape, const TapeChain& chain, const LabelChain& labels,
                              Mode mode, double lambda) {
  if (!(lambda >= 0.0)) {
    throw Error(ErrorCode::NegativeLambda, "lambda must be >= 0, got " + std::to_string(lambda));
  }
  const std::size_t k_levels = chain.probs.size();
  if (labels.size() != k_levels) {
    throw Error(ErrorCode::InvalidChain, "label chain length " + std::to_string(labels.size()));
  }
  const auto levels = supervised_levels(mode, k_levels);
  SampleLoss out;
  out.ce_per_level.resize(k_levels);
  bool first = true;
  for (std::size_t l = 0; l < k_levels; ++l) {
    if (!levels[l]) continue;
    out.ce_per_level[l] = tape.cross_entropy(chain.probs[l], labels[l]);
    out.ce = first ? out.ce_per_level[l] : tape.add(out.ce, out.ce_per_level[l]);
    first = false;
  }
  out.total = out.ce;
  if (has_learned_transitions(mode)) {
    bool first_term = true;
    for (Var t : chain.transitions) {
      const std::size_t cols = tape.value(t).cols();
      Var acc;
      for (std::size_t j = 0; j < cols; ++j) {
        Var h = tape.neg_entropy(tape.column(t, j));
        acc = j == 0 ? h : tape.add(acc, h);
      }
      Var term = tape.scale(acc, 1.0 / static_cast<double>(cols));
      out.conf = first_term ? term : tape.add(out.conf, term);
      first_term = false;
    }
    if (!first_term) {
      out.has_conf = true;
      out.total = tape.add(out.ce, tape.scale(out.conf, lambda));
    }
  }
  return out;
}

std::string loss_record_json(std::size_t step, const LossBreakdown& loss) {
  const double n = loss.num_samples ? static_cast<double>(loss.num_samples) : 1.0;
  nlohmann::ordered_json j;
  j["step"] = step;
  j["ce_per_level"] = loss.ce_per_level;
  j["ce"] = loss.ce_total / n;
  j["conf"] = loss.conf_total / n;
  j["lambda"] = loss.lambda;
  j["total"] = loss.total / n;
  return j.dump();
}

}  // namespace lht
