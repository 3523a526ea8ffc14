#pragma once

#include <span>
#include <string>
#include <vector>

#include "lht/data.hpp"
#include "lht/model.hpp"

namespace lht {

/// Index of the largest entry; ties go to the lowest index.
ClassIndex argmax(const Tensor& p);

struct SeverityHistogram {
  /// counts[h - 1] = number of mistakes whose LCA height is h, h in 1..K.
  std::vector<std::size_t> counts;
  std::size_t mistakes = 0;
  double mean = 0.0;  // 0 when there are no mistakes
};

struct MetricsReport {
  std::size_t num_samples = 0;
  std::vector<double> acc;  // per level
  double avg_acc = 0.0;     // unweighted mean of acc over levels
  /// [level][class]; classes absent from the data get accuracy 0 and count 0.
  std::vector<std::vector<double>> per_class_acc;
  std::vector<std::vector<std::size_t>> class_counts;
  /// [level][true][predicted].
  std::vector<std::vector<std::vector<std::size_t>>> confusion;
  SeverityHistogram severity;
};

/// Argmax decoding of every level against the label chains.
MetricsReport evaluate_predictions(const LabelHierarchy& hierarchy,
                                   std::span<const PredictionChain> predictions,
                                   std::span<const LabelChain> labels);

/// HierarchyMismatch if model and dataset disagree on the hierarchy.
MetricsReport evaluate(const LhtModel& model, const Dataset& dataset);

std::vector<PredictionChain> predict_all(const LhtModel& model, const Dataset& dataset);

/// Histogram of LCA heights over pairs with predicted != truth.
SeverityHistogram mistake_severity(const LabelHierarchy& hierarchy,
                                   std::span<const ClassIndex> predicted_fine,
                                   std::span<const ClassIndex> true_fine);

/// per_class_acc(a) - per_class_acc(b), [level][class]. HierarchyMismatch
/// unless both reports cover the same level sizes and class counts.
std::vector<std::vector<double>> per_class_delta(const MetricsReport& a, const MetricsReport& b);

/// Reinserts a level removed with drop_level(): the missing distribution is
/// Tnaive * p of the level below it in the original hierarchy.
PredictionChain restore_dropped_level(const PredictionChain& reduced,
                                      const LabelHierarchy& original, std::size_t level);

std::string report_to_json(const MetricsReport& report);
/// CSV: level,class,count,accuracy.
std::string per_class_csv(const MetricsReport& report);
/// CSV: level,class,delta.
std::string per_class_delta_csv(const std::vector<std::vector<double>>& delta);

}  // namespace lht
