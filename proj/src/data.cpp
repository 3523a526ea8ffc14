#include "lht/data.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

namespace lht {

std::vector<LabelChain> Dataset::labels() const {
  std::vector<LabelChain> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.labels);
  return out;
}

LabelHierarchy benchmark_hierarchy() { return balanced_hierarchy({8, 4, 2}); }

std::vector<double> default_center_scales(std::size_t num_levels) {
  std::vector<double> scales;
  double s = 0.25;
  for (std::size_t k = 0; k < num_levels; ++k, s *= 1.25) scales.push_back(s);
  return scales;
}

SyntheticConfig benchmark_config(std::uint64_t seed) {
  SyntheticConfig config;
  config.center_scales = default_center_scales(3);
  config.seed = seed;
  return config;
}

namespace {

void check_config(const LabelHierarchy& hierarchy, const SyntheticConfig& config) {
  validate(hierarchy);
  const std::size_t k_levels = hierarchy.num_levels();
  if (config.center_scales.size() != k_levels) {
    throw Error(ErrorCode::InvalidScales, "need one center scale per level");
  }
  for (std::size_t i = 0; i < k_levels; ++i) {
    if (!(config.center_scales[i] > 0.0)) {
      throw Error(ErrorCode::InvalidScales, "center scales must be positive");
    }
    if (i + 1 < k_levels && !(config.center_scales[i] < config.center_scales[i + 1])) {
      throw Error(ErrorCode::InvalidScales, "center scales must increase from fine to coarse");
    }
  }
  if (config.dim < k_levels) {
    throw Error(ErrorCode::InvalidConfig, "feature dimension below number of levels");
  }
  if (!(config.noise_sigma > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "noise sigma must be positive");
  }
}

std::vector<Tensor> draw_centers(const LabelHierarchy& hierarchy, const SyntheticConfig& config,
                                 std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t k_levels = hierarchy.num_levels();
  std::vector<Tensor> coarser;
  for (std::size_t c = 0; c < hierarchy.level_size(k_levels); ++c) {
    Tensor center(config.dim, 1);
    for (auto& v : center.values()) v = config.center_scales[k_levels - 1] * gauss(rng);
    coarser.push_back(std::move(center));
  }
  for (std::size_t level = k_levels - 1; level >= 1; --level) {
    std::vector<Tensor> finer;
    for (std::size_t c = 0; c < hierarchy.level_size(level); ++c) {
      Tensor center = coarser[hierarchy.parent_of(level, c)];
      for (auto& v : center.values()) v += config.center_scales[level - 1] * gauss(rng);
      finer.push_back(std::move(center));
    }
    coarser = std::move(finer);
  }
  return coarser;
}

Dataset draw_split(const LabelHierarchy& hierarchy, const SyntheticConfig& config,
                   const std::vector<Tensor>& centers, std::size_t per_class,
                   std::string split, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, config.noise_sigma);
  Dataset out{hierarchy, {}, config.dim, std::move(split)};
  out.samples.reserve(per_class * centers.size());
  for (ClassIndex c = 0; c < centers.size(); ++c) {
    const LabelChain chain = backtrack(hierarchy, c);
    for (std::size_t n = 0; n < per_class; ++n) {
      Tensor x = centers[c];
      for (auto& v : x.values()) v += gauss(rng);
      out.samples.push_back(Sample{std::move(x), chain});
    }
  }
  return out;
}

}  // namespace

std::vector<Tensor> synthetic_centers(const LabelHierarchy& hierarchy,
                                      const SyntheticConfig& config) {
  check_config(hierarchy, config);
  std::mt19937_64 rng(config.seed);
  return draw_centers(hierarchy, config, rng);
}

std::pair<Dataset, Dataset> generate_synthetic(const LabelHierarchy& hierarchy,
                                               const SyntheticConfig& config) {
  check_config(hierarchy, config);
  std::mt19937_64 rng(config.seed);
  const auto centers = draw_centers(hierarchy, config, rng);
  Dataset train = draw_split(hierarchy, config, centers, config.train_per_class, "train", rng);
  Dataset test = draw_split(hierarchy, config, centers, config.test_per_class, "test", rng);
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t start = 0;
  while (start < s.size() && s[start] == ' ') ++start;
  return s.substr(start);
}

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

}  // namespace

Dataset parse_csv(const std::string& text, const LabelHierarchy& hierarchy, std::string split) {
  validate(hierarchy);
  const std::size_t k_levels = hierarchy.num_levels();
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;

  // Header.
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (!line.empty()) {
      header = split_fields(line);
      break;
    }
  }
  if (header.empty()) throw Error(ErrorCode::ParseError, "line 1: empty file, missing header");
  std::size_t n_features = 0;
  while (n_features < header.size() && trim(header[n_features]) == "f" + std::to_string(n_features)) {
    ++n_features;
  }
  const std::size_t n_labels = header.size() - n_features;
  if (n_labels != k_levels) {
    throw Error(ErrorCode::DimensionMismatch, at_line(line_no) + "header has " +
                                                  std::to_string(n_labels) +
                                                  " label columns, hierarchy has " +
                                                  std::to_string(k_levels) + " levels");
  }
  for (std::size_t k = 0; k < k_levels; ++k) {
    if (trim(header[n_features + k]) != "y" + std::to_string(k + 1)) {
      throw Error(ErrorCode::ParseError, at_line(line_no) + "expected column y" +
                                             std::to_string(k + 1) + ", got '" +
                                             header[n_features + k] + "'");
    }
  }
  if (n_features == 0) throw Error(ErrorCode::DimensionMismatch, at_line(line_no) + "no features");

  Dataset out{hierarchy, {}, n_features, std::move(split)};
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::ParseError, at_line(line_no) + "expected " +
                                             std::to_string(header.size()) + " fields, got " +
                                             std::to_string(fields.size()));
    }
    Sample sample{Tensor(n_features, 1), LabelChain(k_levels)};
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const std::string field = trim(fields[i]);
      const char* begin = field.c_str();
      char* end = nullptr;
      errno = 0;
      if (i < n_features) {
        const double v = std::strtod(begin, &end);
        if (field.empty() || *end != '\0' || errno == ERANGE) {
          throw Error(ErrorCode::ParseError, at_line(line_no) + "bad number '" + field + "'");
        }
        sample.features[i] = v;
      } else {
        const long long v = std::strtoll(begin, &end, 10);
        if (field.empty() || *end != '\0' || v < 0 || errno == ERANGE) {
          throw Error(ErrorCode::ParseError, at_line(line_no) + "bad label '" + field + "'");
        }
        sample.labels[i - n_features] = static_cast<ClassIndex>(v);
      }
    }
    if (!is_consistent_chain(hierarchy, sample.labels)) {
      throw Error(ErrorCode::InconsistentChain,
                  at_line(line_no) + "labels do not form a chain of the hierarchy");
    }
    out.samples.push_back(std::move(sample));
  }
  return out;
}

Dataset load_csv(const std::filesystem::path& path, const LabelHierarchy& hierarchy,
                 std::string split) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), hierarchy, std::move(split));
}

std::string to_csv(const Dataset& dataset) {
  std::string out;
  for (std::size_t i = 0; i < dataset.dim; ++i) out += "f" + std::to_string(i) + ",";
  for (std::size_t k = 0; k < dataset.hierarchy.num_levels(); ++k) {
    out += "y" + std::to_string(k + 1);
    out += k + 1 < dataset.hierarchy.num_levels() ? "," : "\n";
  }
  char buf[32];
  for (const auto& s : dataset.samples) {
    for (double v : s.features.values()) {
      std::snprintf(buf, sizeof(buf), "%.17g,", v);
      out += buf;
    }
    for (std::size_t k = 0; k < s.labels.size(); ++k) {
      out += std::to_string(s.labels[k]);
      out += k + 1 < s.labels.size() ? "," : "\n";
    }
  }
  return out;
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << to_csv(dataset);
}

Dataset drop_level(const Dataset& dataset, std::size_t level) {
  Dataset out{lht::drop_level(dataset.hierarchy, level), {}, dataset.dim, dataset.split};
  out.samples.reserve(dataset.samples.size());
  for (const auto& s : dataset.samples) {
    LabelChain labels = s.labels;
    labels.erase(labels.begin() + static_cast<std::ptrdiff_t>(level - 1));
    out.samples.push_back(Sample{s.features, std::move(labels)});
  }
  return out;
}

Dataset relabel(const Dataset& dataset, const LabelHierarchy& hierarchy) {
  validate(hierarchy);
  if (hierarchy.level_sizes() != dataset.hierarchy.level_sizes()) {
    throw Error(ErrorCode::HierarchyMismatch, "relabel needs the same level sizes");
  }
  Dataset out{hierarchy, {}, dataset.dim, dataset.split};
  out.samples.reserve(dataset.samples.size());
  for (const auto& s : dataset.samples) {
    out.samples.push_back(Sample{s.features, backtrack(hierarchy, s.labels.front())});
  }
  return out;
}

}  // namespace lht
