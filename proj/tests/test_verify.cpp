#include <cmath>
#include <random>

#include "lht/losses.hpp"
#include "lht/verify.hpp"
#include "test_util.hpp"

using namespace lht;

TEST(RelativeError, Floor) {
  EXPECT_NEAR(relative_error(1.0, 1.0001), 0.0001 / 1.0001, 1e-15);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 1e-9), 1e-9 / kGradDenomFloor);
  EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
}

TEST(GradCheck, QuadraticIsExact) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) EXPECT_LT(grad_check("quadratic", seed), 1e-9);
}

TEST(GradCheck, EveryPrimitive) {
  for (const auto& target : grad_check_targets()) {
    if (target.rfind("loss:", 0) == 0) continue;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      EXPECT_LT(grad_check(target, seed), kGradTolerance) << target << " seed " << seed;
    }
  }
}

TEST(GradCheck, FullLossEveryMode) {
  for (const char* mode : {"lht_f2c", "lht_c2f", "lht_naive", "vanilla", "vanilla_single"}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      EXPECT_LT(grad_check(std::string("loss:") + mode, seed), kGradTolerance) << mode;
    }
  }
}

TEST(GradCheck, DetectsBrokenGradient) {
  // A step far too large for the curvature shows up as a large error.
  EXPECT_GT(grad_check("loss:lht_f2c", 0, 1.0), kGradTolerance);
}

TEST(GradCheck, UnknownTarget) {
  EXPECT_LHT_ERROR(grad_check("conv2d", 0), ErrorCode::InvalidConfig);
}

TEST(Theorem1, Oracle) {
  auto r = theorem1_oracle(0);
  EXPECT_LT(r.identity_error, 1e-12);
  ASSERT_EQ(r.margins, (std::vector<double>{5, 10, 20}));
  EXPECT_LT(r.margin_loss.back(), 1e-7);
  EXPECT_TRUE(r.monotone);
  EXPECT_TRUE(r.bounded);
  EXPECT_EQ(r.argmin_disagreements, 0u);
  EXPECT_TRUE(r.sweep_decreasing);
}

TEST(Theorem1, MarginLossAgainstClosedForm) {
  // Fine logits (m, 0, ..., 0) over 8 classes: the true class has softmax
  // 1 / (1 + 7 e^-m); its parent collects one sibling, the root three more.
  auto r = theorem1_oracle(1);
  for (std::size_t i = 0; i < r.margins.size(); ++i) {
    double e = std::exp(-r.margins[i]);
    double expected = std::log1p(7 * e) + std::log((1 + 7 * e) / (1 + e)) +
                      std::log((1 + 7 * e) / (1 + 3 * e));
    EXPECT_NEAR(r.margin_loss[i], expected, 1e-12 + 1e-9 * expected);
  }
}

TEST(AppendixA, RandomCases) {
  auto r = appendixA_check(1000, 3);
  EXPECT_EQ(r.cases, 1000u);
  EXPECT_EQ(r.failures, 0u);
  EXPECT_LT(r.max_error, kAppendixATol);
}

TEST(AppendixA, ClosedForms) {
  PredictionChain uniform;
  uniform.probs = {Tensor(8, 1, 1.0 / 8), Tensor(4, 1, 0.25), Tensor(2, 1, 0.5)};
  std::vector<PredictionChain> chains = {uniform};
  std::vector<LabelChain> labels = {{2, 1, 0}};
  double nll = -std::log(1.0 / 8 * 0.25 * 0.5);
  EXPECT_NEAR(hierarchical_ce(chains, labels).total, nll, 1e-12);
  EXPECT_NEAR(nll, std::log(64.0), 1e-12);

  PredictionChain exact;
  exact.probs = {one_hot(8, 2), one_hot(4, 1), one_hot(2, 0)};
  std::vector<PredictionChain> exact_chains = {exact};
  EXPECT_EQ(hierarchical_ce(exact_chains, labels).total, 0.0);
}

TEST(Lemma1, UniformColumnsPass) {
  auto [train_set, test_set] = generate_synthetic(benchmark_hierarchy(), benchmark_config(0));
  ModelConfig cfg;
  cfg.mode = Mode::LhtF2C;
  LhtModel model(benchmark_hierarchy(), cfg, 0);
  for (const auto& t : model.transition_heads()) {
    model.params()[t.weight].value.fill(0.0);
    model.params()[t.bias].value.fill(0.0);
  }
  auto r = lemma1_check(model, test_set);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.max_column_deviation, 0.0);
  ASSERT_EQ(r.coarse_ce.size(), 2u);
  EXPECT_NEAR(r.coarse_ce[0], std::log(4.0), 1e-12);
  EXPECT_NEAR(r.target_ce[1], std::log(2.0), 1e-15);
}

TEST(Lemma1, SharpColumnsFail) {
  auto [train_set, test_set] = generate_synthetic(benchmark_hierarchy(), benchmark_config(0));
  ModelConfig cfg;
  cfg.mode = Mode::LhtF2C;
  LhtModel model(benchmark_hierarchy(), cfg, 0);
  for (auto& p : model.params()) {
    for (auto& v : p.value.values()) v *= 20.0;
  }
  auto r = measure_lemma1(model, test_set);
  EXPECT_FALSE(r.pass);
  EXPECT_GT(r.max_column_deviation, kLemma1ColumnTol);
  EXPECT_LHT_ERROR(lemma1_check(model, test_set), ErrorCode::NotConverged);

  cfg.mode = Mode::Vanilla;
  EXPECT_LHT_ERROR(measure_lemma1(LhtModel(benchmark_hierarchy(), cfg, 0), test_set),
                   ErrorCode::ModeMismatch);
}

TEST(Lemma1, Recipe) {
  auto cfg = lemma1_config(3);
  EXPECT_EQ(cfg.lambda, 1e4);
  EXPECT_EQ(cfg.mode, Mode::LhtF2C);
  EXPECT_EQ(cfg.seed, 3u);
  EXPECT_NO_THROW(validate(cfg));
}

TEST(RunChecks, OnlyAppendixA) {
  VerifyOptions opts;
  opts.only = {"appendixA"};
  auto results = run_checks(opts);
  ASSERT_EQ(results.size(), 1u);
  EXPECT_EQ(results[0].name, "appendixA");
  EXPECT_TRUE(results[0].pass);
  EXPECT_NE(to_json(results[0]).find("\"margin\""), std::string::npos);
  opts.only = {"bogus"};
  EXPECT_LHT_ERROR(run_checks(opts), ErrorCode::InvalidConfig);
}

TEST(RunChecks, GradAndTheoremFamilies) {
  VerifyOptions opts;
  opts.only = {"grad_check", "theorem1"};
  opts.grad_seeds = 3;
  auto results = run_checks(opts);
  EXPECT_EQ(results.size(), grad_check_targets().size() + 3);
  for (const auto& r : results) EXPECT_TRUE(r.pass) << to_json(r);
}
