#pragma once

#include <span>
#include <string>
#include <vector>

#include "lht/model.hpp"

namespace lht {

inline constexpr double kDefaultLambda = 2.0;

/// Sum over samples of per-level cross-entropies.
struct CeTerms {
  std::vector<double> per_level;  // sums over the batch, level-indexed
  double total = 0.0;
  std::size_t num_samples = 0;
};

/// Batch loss report. Sums follow the objective as written
/// (L = L_CE + lambda * L_Conf summed over samples); ce_per_level holds batch
/// means so ce_total == num_samples * sum(ce_per_level).
struct LossBreakdown {
  std::vector<double> ce_per_level;
  double ce_total = 0.0;
  double conf_total = 0.0;
  double lambda = kDefaultLambda;
  double total = 0.0;
  std::size_t num_samples = 0;

  /// Per-sample mean of `total`; this is what the optimizer differentiates.
  double mean_total() const { return num_samples ? total / double(num_samples) : 0.0; }
};

/// Levels that contribute cross-entropy for a mode. Vanilla supervises only
/// level 1 (its coarse levels are derived from the argmax and carry no
/// gradient); every other mode supervises all K levels.
std::vector<bool> supervised_levels(Mode mode, std::size_t num_levels);

/// Sum_i Sum_k CE(p_i^k, y_i^k). `levels` masks which levels count (empty =
/// all). ShapeMismatch on ragged input, InvalidChain on labels of the wrong
/// length or out of range.
CeTerms hierarchical_ce(std::span<const PredictionChain> chains,
                        std::span<const LabelChain> labels,
                        const std::vector<bool>& levels = {});

/// Column-averaged negative entropy of one transition matrix:
/// (1 / cols) * sum_j <T_.j, log T_.j>.
double mean_column_neg_entropy(const Tensor& transition);

/// Sum over samples and transition matrices of mean_column_neg_entropy.
/// ModeMismatch if any chain has no transition matrices.
double confusion_loss(std::span<const PredictionChain> chains);

/// ce + lambda * conf. NegativeLambda if lambda < 0.
double total_loss(double ce, double conf, double lambda);
LossBreakdown total_loss(const CeTerms& ce, double conf, double lambda);

/// Lower bound of the per-sample confusion loss: -sum over matrices of
/// log(rows).
double confusion_lower_bound(const PredictionChain& chain);

// ---------------------------------------------------------------------------
// Tape versions used for training.

struct SampleLoss {
  std::vector<Var> ce_per_level;  // only supervised levels are valid
  Var ce;
  Var conf;
  bool has_conf = false;
  Var total;
};

/// Records CE and (for learned-transition modes) the confusion term of one
/// sample. The confusion term is only added when the mode learns its
/// transition matrices.
SampleLoss record_sample_loss(Tape& tape, const TapeChain& chain, const LabelChain& labels,
                              Mode mode, double lambda);

/// Structured log record {step, ce_per_level, ce, conf, lambda, total}, means
/// per sample.
std::string loss_record_json(std::size_t step, const LossBreakdown& loss);

}  // namespace lht
