#include "lht/hierarchy.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

namespace lht {

LabelHierarchy::LabelHierarchy(std::vector<std::size_t> level_sizes,
                               std::vector<std::vector<ClassIndex>> parents,
                               std::vector<std::string> level_names,
                               std::vector<std::vector<std::string>> class_names)
    : level_sizes_(std::move(level_sizes)),
      parents_(std::move(parents)),
      level_names_(std::move(level_names)),
      class_names_(std::move(class_names)) {}

std::size_t LabelHierarchy::level_size(std::size_t level) const {
  if (level < 1 || level > level_sizes_.size()) {
    throw Error(ErrorCode::InvalidLevel, "level " + std::to_string(level) + " not in 1.." +
                                             std::to_string(level_sizes_.size()));
  }
  return level_sizes_[level - 1];
}

ClassIndex LabelHierarchy::parent_of(std::size_t level, ClassIndex cls) const {
  if (level < 1 || level >= level_sizes_.size()) {
    throw Error(ErrorCode::InvalidLevel, "no parent map above level " + std::to_string(level));
  }
  const auto& map = parents_[level - 1];
  if (cls >= map.size()) {
    throw Error(ErrorCode::IndexOutOfRange, "class " + std::to_string(cls) + " at level " +
                                                std::to_string(level));
  }
  return map[cls];
}

std::uint64_t LabelHierarchy::structure_hash() const {
  // FNV-1a over the little-endian bytes of every size and parent index.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
      h ^= (word >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  mix(level_sizes_.size());
  for (auto s : level_sizes_) mix(s);
  for (const auto& map : parents_) {
    mix(map.size());
    for (auto p : map) mix(p);
  }
  return h;
}

void validate(const LabelHierarchy& hier) {
  const auto& sizes = hier.level_sizes();
  const std::size_t k_levels = sizes.size();
  if (k_levels < 2) {
    throw Error(ErrorCode::InvalidLevel, "hierarchy needs at least 2 levels");
  }
  for (std::size_t i = 0; i < k_levels; ++i) {
    if (sizes[i] == 0) {
      throw Error(ErrorCode::NonDecreasingSizes, "level " + std::to_string(i + 1) + " is empty");
    }
    if (i + 1 < k_levels && sizes[i] <= sizes[i + 1]) {
      throw Error(ErrorCode::NonDecreasingSizes,
                  "level " + std::to_string(i + 1) + " has " + std::to_string(sizes[i]) +
                      " classes, level " + std::to_string(i + 2) + " has " +
                      std::to_string(sizes[i + 1]));
    }
  }
  const auto& parents = hier.parents();
  if (parents.size() != k_levels - 1) {
    throw Error(ErrorCode::OrphanClass, "expected " + std::to_string(k_levels - 1) +
                                            " parent maps, got " + std::to_string(parents.size()));
  }
  for (std::size_t i = 0; i + 1 < k_levels; ++i) {
    const auto& map = parents[i];
    if (map.size() != sizes[i]) {
      throw Error(ErrorCode::OrphanClass, "parent map of level " + std::to_string(i + 1) +
                                              " covers " + std::to_string(map.size()) + " of " +
                                              std::to_string(sizes[i]) + " classes");
    }
    std::vector<bool> has_child(sizes[i + 1], false);
    for (std::size_t c = 0; c < map.size(); ++c) {
      if (map[c] >= sizes[i + 1]) {
        throw Error(ErrorCode::IndexOutOfRange,
                    "class " + std::to_string(c) + " at level " + std::to_string(i + 1) +
                        " has parent " + std::to_string(map[c]) + " >= " +
                        std::to_string(sizes[i + 1]));
      }
      has_child[map[c]] = true;
    }
    for (std::size_t p = 0; p < has_child.size(); ++p) {
      if (!has_child[p]) {
        throw Error(ErrorCode::ChildlessParent, "class " + std::to_string(p) + " at level " +
                                                    std::to_string(i + 2) + " has no children");
      }
    }
  }
}

LabelHierarchy balanced_hierarchy(const std::vector<std::size_t>& level_sizes) {
  std::vector<std::vector<ClassIndex>> parents;
  for (std::size_t i = 0; i + 1 < level_sizes.size(); ++i) {
    if (level_sizes[i + 1] == 0 || level_sizes[i] % level_sizes[i + 1] != 0) {
      throw Error(ErrorCode::NonDecreasingSizes, "balanced hierarchy needs integral ratios");
    }
    const std::size_t ratio = level_sizes[i] / level_sizes[i + 1];
    std::vector<ClassIndex> map(level_sizes[i]);
    for (std::size_t c = 0; c < map.size(); ++c) map[c] = c / ratio;
    parents.push_back(std::move(map));
  }
  LabelHierarchy hier(level_sizes, std::move(parents));
  validate(hier);
  return hier;
}

NaiveTransitionMatrix naive_transition(const LabelHierarchy& hier, std::size_t level) {
  if (level < 2 || level > hier.num_levels()) {
    throw Error(ErrorCode::InvalidLevel, "naive transition needs 2 <= level <= K, got " +
                                             std::to_string(level));
  }
  const std::size_t rows = hier.level_size(level);
  const std::size_t cols = hier.level_size(level - 1);
  NaiveTransitionMatrix out{level, Tensor(rows, cols)};
  for (std::size_t j = 0; j < cols; ++j) {
    out.entries(hier.parent_of(level - 1, j), j) = 1.0;
  }
  return out;
}

LabelChain backtrack(const LabelHierarchy& hier, ClassIndex fine_label) {
  if (hier.num_levels() == 0 || fine_label >= hier.level_sizes()[0]) {
    throw Error(ErrorCode::IndexOutOfRange, "fine label " + std::to_string(fine_label));
  }
  LabelChain chain{fine_label};
  for (std::size_t level = 1; level < hier.num_levels(); ++level) {
    chain.push_back(hier.parent_of(level, chain.back()));
  }
  return chain;
}

bool is_consistent_chain(const LabelHierarchy& hier, const LabelChain& chain) {
  if (chain.size() != hier.num_levels()) return false;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (chain[i] >= hier.level_sizes()[i]) return false;
    if (i > 0 && hier.parents()[i - 1][chain[i - 1]] != chain[i]) return false;
  }
  return true;
}

LabelHierarchy randomize(const LabelHierarchy& hier, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& sizes = hier.level_sizes();
  std::vector<std::vector<ClassIndex>> parents;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    std::uniform_int_distribution<ClassIndex> pick(0, sizes[i + 1] - 1);
    std::vector<ClassIndex> map(sizes[i]);
    while (true) {
      std::vector<bool> has_child(sizes[i + 1], false);
      for (auto& p : map) {
        p = pick(rng);
        has_child[p] = true;
      }
      if (std::all_of(has_child.begin(), has_child.end(), [](bool b) { return b; })) break;
    }
    parents.push_back(std::move(map));
  }
  // Class names of coarse levels no longer describe the regrouped classes.
  std::vector<std::vector<std::string>> names;
  if (!hier.class_names().empty()) names.push_back(hier.class_names().front());
  return LabelHierarchy(sizes, std::move(parents), hier.level_names(), std::move(names));
}

LabelHierarchy drop_level(const LabelHierarchy& hier, std::size_t level) {
  const std::size_t k_levels = hier.num_levels();
  if (level < 2 || level + 1 > k_levels) {
    throw Error(ErrorCode::InvalidLevel, "only interior levels 2..K-1 can be dropped, got " +
                                             std::to_string(level));
  }
  auto sizes = hier.level_sizes();
  auto parents = hier.parents();
  const std::size_t below = level - 2;  // map (level-1) -> level
  std::vector<ClassIndex> composed(parents[below].size());
  for (std::size_t c = 0; c < composed.size(); ++c) {
    composed[c] = parents[below + 1][parents[below][c]];
  }
  parents[below] = std::move(composed);
  parents.erase(parents.begin() + static_cast<std::ptrdiff_t>(below + 1));
  sizes.erase(sizes.begin() + static_cast<std::ptrdiff_t>(level - 1));

  auto level_names = hier.level_names();
  if (level_names.size() == k_levels) {
    level_names.erase(level_names.begin() + static_cast<std::ptrdiff_t>(level - 1));
  }
  auto class_names = hier.class_names();
  if (class_names.size() == k_levels) {
    class_names.erase(class_names.begin() + static_cast<std::ptrdiff_t>(level - 1));
  }
  return LabelHierarchy(std::move(sizes), std::move(parents), std::move(level_names),
                        std::move(class_names));
}

std::size_t lca_height(const LabelHierarchy& hier, ClassIndex a, ClassIndex b) {
  if (a >= hier.level_size(1) || b >= hier.level_size(1)) {
    throw Error(ErrorCode::IndexOutOfRange, "lca of classes outside level 1");
  }
  if (a == b) return 0;
  for (std::size_t level = 1; level < hier.num_levels(); ++level) {
    a = hier.parent_of(level, a);
    b = hier.parent_of(level, b);
    if (a == b) return level;
  }
  return hier.num_levels();
}

std::string hierarchy_to_json(const LabelHierarchy& hier) {
  nlohmann::ordered_json j;
  j["level_sizes"] = hier.level_sizes();
  j["parents"] = hier.parents();
  if (!hier.level_names().empty()) j["level_names"] = hier.level_names();
  if (!hier.class_names().empty()) j["class_names"] = hier.class_names();
  return j.dump(2) + "\n";
}

LabelHierarchy hierarchy_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    auto sizes = j.at("level_sizes").get<std::vector<std::size_t>>();
    auto parents = j.at("parents").get<std::vector<std::vector<ClassIndex>>>();
    std::vector<std::string> level_names;
    std::vector<std::vector<std::string>> class_names;
    if (j.contains("level_names")) level_names = j["level_names"].get<std::vector<std::string>>();
    if (j.contains("class_names")) {
      class_names = j["class_names"].get<std::vector<std::vector<std::string>>>();
    }
    if (!level_names.empty() && level_names.size() != sizes.size()) {
      throw Error(ErrorCode::ParseError, "level_names must have one entry per level");
    }
    for (std::size_t i = 0; i < class_names.size(); ++i) {
      if (i >= sizes.size() || class_names[i].size() != sizes[i]) {
        throw Error(ErrorCode::ParseError, "class_names level " + std::to_string(i + 1) +
                                               " does not match level size");
      }
    }
    return LabelHierarchy(std::move(sizes), std::move(parents), std::move(level_names),
                          std::move(class_names));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("hierarchy file: ") + e.what());
  }
}

LabelHierarchy load_hierarchy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  auto hier = hierarchy_from_json(buf.str());
  validate(hier);
  return hier;
}

void save_hierarchy(const LabelHierarchy& hier, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << hierarchy_to_json(hier);
}

}  // namespace lht
