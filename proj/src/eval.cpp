#include "lht/eval.hpp"

#include <cstdio>

#include "json.hpp"

namespace lht {

ClassIndex argmax(const Tensor& p) {
  if (p.size() == 0) throw Error(ErrorCode::ShapeMismatch, "argmax of empty tensor");
  ClassIndex best = 0;
  for (ClassIndex i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return best;
}

SeverityHistogram mistake_severity(const LabelHierarchy& hierarchy,
                                   std::span<const ClassIndex> predicted_fine,
                                   std::span<const ClassIndex> true_fine) {
  if (predicted_fine.size() != true_fine.size()) {
    throw Error(ErrorCode::ShapeMismatch, "prediction/label count mismatch");
  }
  SeverityHistogram out;
  out.counts.assign(hierarchy.num_levels(), 0);
  double sum = 0.0;
  for (std::size_t i = 0; i < true_fine.size(); ++i) {
    const std::size_t h = lca_height(hierarchy, predicted_fine[i], true_fine[i]);
    if (h == 0) continue;
    ++out.counts[h - 1];
    ++out.mistakes;
    sum += static_cast<double>(h);
  }
  if (out.mistakes > 0) out.mean = sum / static_cast<double>(out.mistakes);
  return out;
}

MetricsReport evaluate_predictions(const LabelHierarchy& hierarchy,
                                   std::span<const PredictionChain> predictions,
                                   std::span<const LabelChain> labels) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "prediction/label count mismatch");
  }
  const std::size_t k_levels = hierarchy.num_levels();
  const auto& sizes = hierarchy.level_sizes();
  MetricsReport r;
  r.num_samples = predictions.size();
  r.acc.assign(k_levels, 0.0);
  r.per_class_acc.resize(k_levels);
  r.class_counts.resize(k_levels);
  r.confusion.resize(k_levels);
  for (std::size_t l = 0; l < k_levels; ++l) {
    r.per_class_acc[l].assign(sizes[l], 0.0);
    r.class_counts[l].assign(sizes[l], 0);
    r.confusion[l].assign(sizes[l], std::vector<std::size_t>(sizes[l], 0));
  }

  std::vector<ClassIndex> fine_pred, fine_true;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& chain = predictions[i];
    if (chain.probs.size() != k_levels || labels[i].size() != k_levels) {
      throw Error(ErrorCode::HierarchyMismatch, "prediction depth differs from hierarchy");
    }
    for (std::size_t l = 0; l < k_levels; ++l) {
      if (chain.probs[l].size() != sizes[l] || labels[i][l] >= sizes[l]) {
        throw Error(ErrorCode::HierarchyMismatch, "level " + std::to_string(l + 1) +
                                                      " size differs from hierarchy");
      }
      const ClassIndex pred = argmax(chain.probs[l]);
      const ClassIndex truth = labels[i][l];
      ++r.confusion[l][truth][pred];
      ++r.class_counts[l][truth];
      if (pred == truth) {
        r.acc[l] += 1.0;
        r.per_class_acc[l][truth] += 1.0;
      }
      if (l == 0) {
        fine_pred.push_back(pred);
        fine_true.push_back(truth);
      }
    }
  }
  const double n = static_cast<double>(r.num_samples);
  for (std::size_t l = 0; l < k_levels; ++l) {
    if (n > 0) r.acc[l] /= n;
    for (std::size_t c = 0; c < sizes[l]; ++c) {
      if (r.class_counts[l][c] > 0) {
        r.per_class_acc[l][c] /= static_cast<double>(r.class_counts[l][c]);
      }
    }
    r.avg_acc += r.acc[l];
  }
  r.avg_acc /= static_cast<double>(k_levels);
  r.severity = mistake_severity(hierarchy, fine_pred, fine_true);
  return r;
}

std::vector<PredictionChain> predict_all(const LhtModel& model, const Dataset& dataset) {
  std::vector<PredictionChain> out;
  out.reserve(dataset.size());
  for (const auto& s : dataset.samples) out.push_back(model.predict(s.features));
  return out;
}

MetricsReport evaluate(const LhtModel& model, const Dataset& dataset) {
  if (!model.hierarchy().same_structure(dataset.hierarchy)) {
    throw Error(ErrorCode::HierarchyMismatch, "model and dataset use different hierarchies");
  }
  const auto predictions = predict_all(model, dataset);
  const auto labels = dataset.labels();
  return evaluate_predictions(dataset.hierarchy, predictions, labels);
}

std::vector<std::vector<double>> per_class_delta(const MetricsReport& a, const MetricsReport& b) {
  if (a.class_counts != b.class_counts) {
    throw Error(ErrorCode::HierarchyMismatch, "reports cover different hierarchies or data");
  }
  std::vector<std::vector<double>> delta(a.per_class_acc.size());
  for (std::size_t l = 0; l < delta.size(); ++l) {
    delta[l].resize(a.per_class_acc[l].size());
    for (std::size_t c = 0; c < delta[l].size(); ++c) {
      delta[l][c] = a.per_class_acc[l][c] - b.per_class_acc[l][c];
    }
  }
  return delta;
}

PredictionChain restore_dropped_level(const PredictionChain& reduced,
                                      const LabelHierarchy& original, std::size_t level) {
  if (level < 2 || level + 1 > original.num_levels() ||
      reduced.probs.size() + 1 != original.num_levels()) {
    throw Error(ErrorCode::InvalidLevel, "cannot restore level " + std::to_string(level));
  }
  PredictionChain out;
  out.probs = reduced.probs;
  const Tensor below = reduced.probs[level - 2];
  out.probs.insert(out.probs.begin() + static_cast<std::ptrdiff_t>(level - 1),
                   matvec(naive_transition(original, level).entries, below));
  return out;
}

std::string report_to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["num_samples"] = report.num_samples;
  j["acc"] = report.acc;
  j["avg_acc"] = report.avg_acc;
  j["per_class_acc"] = report.per_class_acc;
  j["class_counts"] = report.class_counts;
  j["confusion"] = report.confusion;
  nlohmann::ordered_json sev;
  sev["counts"] = report.severity.counts;
  sev["mistakes"] = report.severity.mistakes;
  sev["mean"] = report.severity.mean;
  j["severity"] = std::move(sev);
  return j.dump(2) + "\n";
}

std::string per_class_csv(const MetricsReport& report) {
  std::string out = "level,class,count,accuracy\n";
  char buf[96];
  for (std::size_t l = 0; l < report.per_class_acc.size(); ++l) {
    for (std::size_t c = 0; c < report.per_class_acc[l].size(); ++c) {
      std::snprintf(buf, sizeof(buf), "%zu,%zu,%zu,%.17g\n", l + 1, c, report.class_counts[l][c],
                    report.per_class_acc[l][c]);
      out += buf;
    }
  }
  return out;
}

std::string per_class_delta_csv(const std::vector<std::vector<double>>& delta) {
  std::string out = "level,class,delta\n";
  char buf[80];
  for (std::size_t l = 0; l < delta.size(); ++l) {
    for (std::size_t c = 0; c < delta[l].size(); ++c) {
      std::snprintf(buf, sizeof(buf), "%zu,%zu,%.17g\n", l + 1, c, delta[l][c]);
      out += buf;
    }
  }
  return out;
}

}  // namespace lht
