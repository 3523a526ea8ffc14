#include <random>
#include <set>

#include "lht/hierarchy.hpp"
#include "test_util.hpp"

using namespace lht;

namespace {

LabelHierarchy figure_hierarchy() { return LabelHierarchy({4, 2}, {{0, 0, 1, 1}}); }

// Random complete hierarchy with the given sizes; every coarse class gets at
// least one child.
LabelHierarchy random_complete(const std::vector<std::size_t>& sizes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<ClassIndex>> parents;
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    std::vector<ClassIndex> map(sizes[k]);
    for (std::size_t c = 0; c < sizes[k]; ++c) map[c] = c < sizes[k + 1] ? c : rng() % sizes[k + 1];
    std::shuffle(map.begin(), map.end(), rng);
    parents.push_back(map);
  }
  return LabelHierarchy(sizes, parents);
}

}  // namespace

TEST(Hierarchy, BalancedPresetValidates) {
  auto h = balanced_hierarchy({8, 4, 2});
  EXPECT_NO_THROW(validate(h));
  for (ClassIndex c = 0; c < 8; ++c) EXPECT_EQ(h.parent_of(1, c), c / 2);
  for (ClassIndex c = 0; c < 4; ++c) EXPECT_EQ(h.parent_of(2, c), c / 2);
}

TEST(Hierarchy, NonDecreasingSizesRejected) {
  LabelHierarchy h({8, 4, 4}, {{0, 0, 1, 1, 2, 2, 3, 3}, {0, 1, 2, 3}});
  EXPECT_LHT_ERROR(validate(h), ErrorCode::NonDecreasingSizes);
}

TEST(Hierarchy, ThirteenOrdersThirtyEightFamiliesTwoHundredSpecies) {
  auto h = random_complete({200, 38, 13}, 3);
  EXPECT_NO_THROW(validate(h));
  EXPECT_EQ(h.level_size(1), 200u);
  EXPECT_EQ(h.level_size(3), 13u);
}

TEST(Hierarchy, OrphanAndChildlessDetected) {
  EXPECT_LHT_ERROR(validate(LabelHierarchy({4, 2}, {{0, 0, 1}})), ErrorCode::OrphanClass);
  EXPECT_LHT_ERROR(validate(LabelHierarchy({4, 2}, {{0, 0, 0, 0}})), ErrorCode::ChildlessParent);
  EXPECT_LHT_ERROR(validate(LabelHierarchy({4, 2}, {{0, 0, 1, 2}})), ErrorCode::IndexOutOfRange);
}

TEST(Hierarchy, NaiveTransitionOfFigureHierarchy) {
  auto t = naive_transition(figure_hierarchy(), 2);
  EXPECT_EQ(t.entries, Tensor::matrix(2, 4, {1, 1, 0, 0, 0, 0, 1, 1}));
}

TEST(Hierarchy, NaiveTransitionOfIdentitySliceIsIdentity) {
  LabelHierarchy square({3, 3}, {{0, 1, 2}});
  auto t = naive_transition(square, 2);
  EXPECT_EQ(t.entries, Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
}

TEST(Hierarchy, NaiveTransitionBalancedPairing) {
  auto t = naive_transition(balanced_hierarchy({8, 4}), 2).entries;
  ASSERT_EQ(t.rows(), 4u);
  ASSERT_EQ(t.cols(), 8u);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(t(i, j), i == j / 2 ? 1.0 : 0.0);
  }
}

TEST(Hierarchy, NaiveTransitionColumnsAreOneHot) {
  auto h = random_complete({20, 7, 3}, 11);
  for (std::size_t level = 2; level <= 3; ++level) {
    auto t = naive_transition(h, level).entries;
    for (std::size_t j = 0; j < t.cols(); ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < t.rows(); ++i) s += t(i, j);
      EXPECT_EQ(s, 1.0);
    }
  }
}

TEST(Hierarchy, NaiveTransitionLevelRange) {
  auto h = balanced_hierarchy({8, 4, 2});
  EXPECT_LHT_ERROR(naive_transition(h, 1), ErrorCode::InvalidLevel);
  EXPECT_LHT_ERROR(naive_transition(h, 4), ErrorCode::InvalidLevel);
}

TEST(Hierarchy, Backtrack) {
  auto h = balanced_hierarchy({8, 4, 2});
  EXPECT_EQ(backtrack(h, 5), (LabelChain{5, 2, 1}));
  EXPECT_EQ(backtrack(h, 0), (LabelChain{0, 0, 0}));
  EXPECT_LHT_ERROR(backtrack(h, 8), ErrorCode::IndexOutOfRange);
}

TEST(Hierarchy, BacktrackIsAlwaysConsistent) {
  auto h = random_complete({30, 9, 4, 2}, 5);
  for (ClassIndex c = 0; c < 30; ++c) EXPECT_TRUE(is_consistent_chain(h, backtrack(h, c)));
  EXPECT_FALSE(is_consistent_chain(balanced_hierarchy({8, 4, 2}), {5, 3, 1}));
  EXPECT_FALSE(is_consistent_chain(balanced_hierarchy({8, 4, 2}), {5, 2}));
}

TEST(Hierarchy, RandomizeDeterministicAndValid) {
  auto h = balanced_hierarchy({8, 4, 2});
  EXPECT_TRUE(randomize(h, 42).same_structure(randomize(h, 42)));
  std::size_t differs = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto r = randomize(h, seed);
    EXPECT_NO_THROW(validate(r));
    EXPECT_EQ(r.level_sizes(), h.level_sizes());
    if (!r.same_structure(h)) ++differs;
  }
  EXPECT_GE(differs, 99u);
}

TEST(Hierarchy, DropLevelComposesParents) {
  auto h = balanced_hierarchy({8, 4, 2});
  auto d = drop_level(h, 2);
  EXPECT_EQ(d.level_sizes(), (std::vector<std::size_t>{8, 2}));
  for (ClassIndex c = 0; c < 8; ++c) EXPECT_EQ(d.parent_of(1, c), c / 4);
  EXPECT_LHT_ERROR(drop_level(h, 1), ErrorCode::InvalidLevel);
  EXPECT_LHT_ERROR(drop_level(h, 3), ErrorCode::InvalidLevel);
}

TEST(Hierarchy, LcaHeight) {
  auto h = balanced_hierarchy({8, 4, 2});
  EXPECT_EQ(lca_height(h, 5, 5), 0u);
  EXPECT_EQ(lca_height(h, 4, 5), 1u);
  EXPECT_EQ(lca_height(h, 4, 6), 2u);
  EXPECT_EQ(lca_height(h, 0, 7), 3u);
}

TEST(Hierarchy, JsonRoundTrip) {
  LabelHierarchy h({4, 2}, {{0, 0, 1, 1}}, {"family", "order"},
                   {{"a", "b", "c", "d"}, {"x", "y"}});
  auto back = hierarchy_from_json(hierarchy_to_json(h));
  EXPECT_TRUE(back.same_structure(h));
  EXPECT_EQ(back.level_names(), h.level_names());
  EXPECT_EQ(back.class_names(), h.class_names());
  EXPECT_EQ(hierarchy_to_json(back), hierarchy_to_json(h));
}

TEST(Hierarchy, FileRoundTripAndHash) {
  auto dir = lht::testing::temp_dir();
  auto h = random_complete({12, 5, 2}, 9);
  save_hierarchy(h, dir / "h.json");
  auto back = load_hierarchy(dir / "h.json");
  EXPECT_TRUE(back.same_structure(h));
  EXPECT_EQ(back.structure_hash(), h.structure_hash());
  EXPECT_NE(balanced_hierarchy({8, 4, 2}).structure_hash(),
            randomize(balanced_hierarchy({8, 4, 2}), 1).structure_hash());
}

TEST(Hierarchy, LoaderValidates) {
  auto dir = lht::testing::temp_dir();
  std::ofstream(dir / "h.json") << R"({"level_sizes": [4, 4], "parents": [[0,1,2,3]]})";
  EXPECT_LHT_ERROR(load_hierarchy(dir / "h.json"), ErrorCode::NonDecreasingSizes);
  EXPECT_LHT_ERROR(hierarchy_from_json("not json"), ErrorCode::ParseError);
  EXPECT_LHT_ERROR(load_hierarchy("/nonexistent/h.json"), ErrorCode::IoError);
}
