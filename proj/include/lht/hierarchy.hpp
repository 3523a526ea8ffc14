#pragma once

// Level numbering convention used throughout the library:
//
//   * Functions that take a `level` argument use 1-based levels, level 1
//     being the finest and level K the coarsest.
//   * Containers indexed by level (level_sizes(), LabelChain, per-level
//     vectors in predictions and reports) are 0-based: element i holds
//     level i + 1.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lht/tensor.hpp"

namespace lht {

using ClassIndex = std::size_t;

/// One label per level, finest first: chain[0] = y^1, chain[K-1] = y^K.
using LabelChain = std::vector<ClassIndex>;

/// K-level label taxonomy given by parent maps.
///
/// parents()[i][c] is the class at level i + 2 that owns class c of level
/// i + 1. The constructor stores its input as-is; call validate() (or use
/// load_hierarchy(), which does) before relying on the invariants.
class LabelHierarchy {
 public:
  LabelHierarchy() = default;
  LabelHierarchy(std::vector<std::size_t> level_sizes,
                 std::vector<std::vector<ClassIndex>> parents,
                 std::vector<std::string> level_names = {},
                 std::vector<std::vector<std::string>> class_names = {});

  std::size_t num_levels() const noexcept { return level_sizes_.size(); }
  const std::vector<std::size_t>& level_sizes() const noexcept { return level_sizes_; }
  /// Number of classes at 1-based `level`.
  std::size_t level_size(std::size_t level) const;

  const std::vector<std::vector<ClassIndex>>& parents() const noexcept { return parents_; }
  /// Parent (at level + 1) of class `cls` at 1-based `level`.
  ClassIndex parent_of(std::size_t level, ClassIndex cls) const;

  const std::vector<std::string>& level_names() const noexcept { return level_names_; }
  const std::vector<std::vector<std::string>>& class_names() const noexcept {
    return class_names_;
  }

  /// Structural equality (sizes and parent maps; names ignored).
  bool same_structure(const LabelHierarchy& other) const noexcept {
    return level_sizes_ == other.level_sizes_ && parents_ == other.parents_;
  }

  /// Stable 64-bit fingerprint of sizes and parent maps, used to bind
  /// checkpoints and datasets to a hierarchy.
  std::uint64_t structure_hash() const;

 private:
  std::vector<std::size_t> level_sizes_;
  std::vector<std::vector<ClassIndex>> parents_;
  std::vector<std::string> level_names_;
  std::vector<std::vector<std::string>> class_names_;
};

/// Throws Error with the first violated invariant: NonDecreasingSizes,
/// OrphanClass (missing or extra parent entries), IndexOutOfRange (parent
/// index past the coarser level) or ChildlessParent.
void validate(const LabelHierarchy& hier);

/// Balanced preset: sizes as given, class i mapped to parent floor(i / ratio)
/// where ratio = C_k / C_{k+1} must be integral.
LabelHierarchy balanced_hierarchy(const std::vector<std::size_t>& level_sizes);

/// Naive 0/1 transition matrix for the pair (level - 1) -> level, 2 <= level <= K.
/// Shape C_level x C_{level-1}; entry (i, j) is 1 iff class j is a child of i.
struct NaiveTransitionMatrix {
  std::size_t level = 0;
  Tensor entries;
};

NaiveTransitionMatrix naive_transition(const LabelHierarchy& hier, std::size_t level);

/// Full label chain implied by a finest-level class.
LabelChain backtrack(const LabelHierarchy& hier, ClassIndex fine_label);

/// True iff `chain` has K entries, all in range, and each coarse entry is the
/// parent of the previous one.
bool is_consistent_chain(const LabelHierarchy& hier, const LabelChain& chain);

/// Same sizes and finest classes; every parent map redrawn uniformly at random,
/// resampling until no coarse class is left without children.
LabelHierarchy randomize(const LabelHierarchy& hier, std::uint64_t seed);

/// Removes interior level `level` (2 <= level <= K-1), composing the parent
/// maps across the gap.
LabelHierarchy drop_level(const LabelHierarchy& hier, std::size_t level);

/// Height of the lowest common ancestor of two finest-level classes:
/// 0 when equal, h when they first share an ancestor at level h + 1, and K
/// when they share none.
std::size_t lca_height(const LabelHierarchy& hier, ClassIndex a, ClassIndex b);

// Hierarchy file (JSON): {"level_sizes": [...], "parents": [[...], ...],
// optional "level_names": [...], "class_names": [[...], ...]}.
std::string hierarchy_to_json(const LabelHierarchy& hier);
LabelHierarchy hierarchy_from_json(const std::string& text);
LabelHierarchy load_hierarchy(const std::filesystem::path& path);
void save_hierarchy(const LabelHierarchy& hier, const std::filesystem::path& path);

}  // namespace lht
