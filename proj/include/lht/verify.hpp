#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lht/data.hpp"
#include "lht/model.hpp"
#include "lht/training.hpp"

namespace lht {

/// One machine-readable verdict. Every check has the form
/// `measured < threshold`; margin = threshold - measured.
struct CheckResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::uint64_t seed = 0;
  std::string detail;

  double margin() const { return threshold - measured; }
};

std::string to_json(const CheckResult& result);

// ---------------------------------------------------------------------------
// Finite differences.

/// |analytic - numeric| / max(|analytic|, |numeric|, kGradDenomFloor). The floor
/// sits above the roundoff of a central difference at h = 1e-5 (about
/// 1e-16 * |f| / h), below which a relative comparison is meaningless.
inline constexpr double kGradDenomFloor = 1e-6;
inline constexpr double kGradStep = 1e-5;
inline constexpr double kGradTolerance = 1e-4;

double relative_error(double analytic, double numeric);

/// Targets accepted by grad_check: one per tape primitive, "quadratic", and
/// "loss:<mode>" for the full objective of each mode.
std::vector<std::string> grad_check_targets();

/// Max relative error between tape gradients and central differences with
/// step h, over every parameter coordinate of a randomly drawn instance of
/// `target`. InvalidConfig for unknown targets; NumericalError if a function
/// value is not finite.
double grad_check(std::string_view target, std::uint64_t seed, double h = kGradStep);

// ---------------------------------------------------------------------------
// Naive transitions reduce to fine-level CE.

struct Theorem1Report {
  /// (a) max |CE of the naive-mode chain - CE of descendant sums of p^1|.
  double identity_error = 0.0;
  /// (b) total L_CE at fine margins 5, 10, 20, and the K * CE_fine bound.
  std::vector<double> margins;
  std::vector<double> margin_loss;
  std::vector<double> margin_bound;
  bool monotone = false;
  bool bounded = false;
  /// (c) grid points where the argmin sets of the two objectives differ.
  std::size_t argmin_disagreements = 0;
  /// (c) both objectives strictly decrease along the 1-D margin sweep.
  bool sweep_decreasing = false;
};

/// (a) on random naive-mode networks and inputs, (b) with fine logits set
/// directly, (c) brute force over a [4,2] toy with fine logits (a, b, 0, 0)
/// on the grid [-10, 10] step 0.1, label 0.
Theorem1Report theorem1_oracle(std::uint64_t seed, std::size_t num_cases = 8);

// ---------------------------------------------------------------------------
// Large-lambda limit.

inline constexpr double kLemma1ColumnTol = 0.01;
inline constexpr double kLemma1CeTol = 0.02;

struct Lemma1Report {
  /// Per transition matrix: max over samples and entries of |T_ij - 1/rows|.
  std::vector<double> column_deviation;
  /// Per coarse level (2..K): mean CE over the dataset, and log C_k.
  std::vector<double> coarse_ce;
  std::vector<double> target_ce;
  double max_column_deviation = 0.0;
  double max_ce_deviation = 0.0;
  bool pass = false;
};

/// Measures how close an f2c/c2f model is to the uniform-transition limit.
/// ModeMismatch for modes without learned transitions.
Lemma1Report measure_lemma1(const LhtModel& model, const Dataset& data);
/// measure_lemma1 that throws NotConverged when a threshold is exceeded.
Lemma1Report lemma1_check(const LhtModel& model, const Dataset& data);

/// Training recipe for the large-lambda run on the benchmark: 2000 f2c steps
/// with learning rates 20 / lambda (heads) and 0.1 / lambda (backbone). The
/// confusion term's curvature grows with lambda, so the default rates
/// diverge; at lambda = 1e4 heads become unstable around 40 / lambda.
TrainConfig lemma1_config(std::uint64_t seed, double lambda = 1e4);

// ---------------------------------------------------------------------------
// Chain likelihood equals summed CE.

struct AppendixAReport {
  std::size_t cases = 0;
  std::size_t failures = 0;
  double max_error = 0.0;
};

inline constexpr double kAppendixATol = 1e-10;

/// n random (per-level simplex prediction, per-level label) tuples on the
/// [8,4,2] preset; compares -log prod_k p^k[y^k] with sum_k CE(p^k, y^k).
AppendixAReport appendixA_check(std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------

struct VerifyOptions {
  /// Check families to run ("grad_check", "theorem1", "lemma1",
  /// "appendixA"); empty = all.
  std::vector<std::string> only;
  std::uint64_t seed = 0;
  /// Seeds per gradient-check target.
  std::size_t grad_seeds = 50;
  std::size_t appendix_cases = 1000;
};

std::vector<std::string> check_families();

/// Runs the selected families. InvalidConfig on an unknown family name.
std::vector<CheckResult> run_checks(const VerifyOptions& options);

}  // namespace lht
