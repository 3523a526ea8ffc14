#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "lht/hierarchy.hpp"
#include "lht/tensor.hpp"

namespace lht {

struct Sample {
  Tensor features;     // column vector of length dim
  LabelChain labels;   // finest first
};

struct Dataset {
  LabelHierarchy hierarchy;
  std::vector<Sample> samples;
  std::size_t dim = 0;
  std::string split;  // "train", "test" or empty

  std::size_t size() const noexcept { return samples.size(); }
  std::vector<LabelChain> labels() const;
};

/// Hierarchical Gaussian mixture. Coarsest centers are N(0, s_K^2 I); each
/// child center is its parent's plus N(0, s_k^2 I); samples are their finest
/// center plus N(0, sigma^2 I).
struct SyntheticConfig {
  std::size_t dim = 16;
  std::size_t train_per_class = 100;
  std::size_t test_per_class = 100;
  double noise_sigma = 0.6;
  /// Level-indexed (finest first): s_1 < s_2 < ... < s_K.
  std::vector<double> center_scales = {0.25, 0.3125, 0.390625};
  std::uint64_t seed = 0;
};

/// Desk-scale benchmark: hierarchy [8,4,2] (balanced), d = 16, 100 + 100
/// samples per fine class, scales (1, 1.25, 1.5625) * 0.25, sigma 0.6. A
/// logistic-regression fine classifier scores about 79% on the test split and
/// the coarsest level stays below saturation.
SyntheticConfig benchmark_config(std::uint64_t seed = 0);
LabelHierarchy benchmark_hierarchy();

/// 0.25 * 1.25^(k-1) for k = 1..K; the benchmark's scales for K = 3.
std::vector<double> default_center_scales(std::size_t num_levels);

/// Returns (train, test). InvalidScales unless scales strictly increase with
/// level; InvalidConfig for dim < K or non-positive sigma.
std::pair<Dataset, Dataset> generate_synthetic(const LabelHierarchy& hierarchy,
                                               const SyntheticConfig& config);

/// Fine-class centers the generator draws for `config` (level-1 order).
std::vector<Tensor> synthetic_centers(const LabelHierarchy& hierarchy,
                                      const SyntheticConfig& config);

/// CSV with header f0..f{d-1},y1..yK, labels 0-based, finest first.
/// ParseError(line) on malformed rows, InconsistentChain(line) when the
/// labels disagree with the hierarchy, DimensionMismatch on a header with the
/// wrong number of label columns.
Dataset load_csv(const std::filesystem::path& path, const LabelHierarchy& hierarchy,
                 std::string split = {});
Dataset parse_csv(const std::string& text, const LabelHierarchy& hierarchy,
                  std::string split = {});
void save_csv(const Dataset& dataset, const std::filesystem::path& path);
std::string to_csv(const Dataset& dataset);

/// Drops interior level `level` (1-based) from both hierarchy and labels.
Dataset drop_level(const Dataset& dataset, std::size_t level);

/// Keeps features and finest labels, re-deriving every coarse label from
/// `hierarchy` (used with randomize()).
Dataset relabel(const Dataset& dataset, const LabelHierarchy& hierarchy);

}  // namespace lht
