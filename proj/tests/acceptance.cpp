// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Experiments use the benchmark dataset (data seed 0) and
// training seeds 0-4.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lht/cli.hpp"
#include "lht/data.hpp"
#include "lht/eval.hpp"
#include "lht/training.hpp"
#include "lht/verify.hpp"

using namespace lht;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kRunSeeds = 5;

struct Verdict {
  bool pass = true;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

const std::pair<Dataset, Dataset>& benchmark() {
  static const auto data = generate_synthetic(benchmark_hierarchy(), benchmark_config(0));
  return data;
}

MetricsReport train_and_evaluate(const Dataset& train_set, const Dataset& test_set, Mode mode,
                                 double lambda, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.lambda = lambda;
  cfg.seed = seed;
  LhtModel model(train_set.hierarchy, model_config(cfg, train_set.dim), seed);
  auto result = train(std::move(model), train_set, cfg);
  return evaluate(result.model, test_set);
}

// Mean per-level accuracy and avg_acc over training seeds 0-4.
struct SeedMean {
  std::vector<double> acc;
  double avg = 0.0;
};

SeedMean mean_over_seeds(const Dataset& train_set, const Dataset& test_set, Mode mode,
                         double lambda) {
  SeedMean m;
  for (std::uint64_t seed = 0; seed < kRunSeeds; ++seed) {
    auto r = train_and_evaluate(train_set, test_set, mode, lambda, seed);
    if (m.acc.empty()) m.acc.assign(r.acc.size(), 0.0);
    for (std::size_t k = 0; k < r.acc.size(); ++k) m.acc[k] += r.acc[k] / kRunSeeds;
    m.avg += r.avg_acc / kRunSeeds;
  }
  return m;
}

std::string describe(const SeedMean& m) {
  std::string s = "avg " + fmt(m.avg) + " (";
  for (std::size_t k = 0; k < m.acc.size(); ++k) s += (k ? "/" : "") + fmt(m.acc[k]);
  return s + ")";
}

Tensor random_input(std::mt19937_64& rng, double sd) {
  std::normal_distribution<double> dist(0.0, sd);
  Tensor x(16, 1);
  for (auto& v : x.values()) v = dist(rng);
  return x;
}

// ---------------------------------------------------------------------------

Verdict criterion_gradients() {
  Stopwatch clock;
  VerifyOptions opts;
  opts.only = {"grad_check"};
  opts.grad_seeds = 50;
  auto results = run_checks(opts);
  const double elapsed = clock.seconds();
  Verdict v;
  double worst = 0.0, quadratic = 0.0;
  for (const auto& r : results) {
    if (r.name == "grad_check:quadratic") {
      quadratic = r.measured;
      v.pass = v.pass && r.measured < 1e-9;
    } else {
      worst = std::max(worst, r.measured);
      v.pass = v.pass && r.measured < kGradTolerance;
    }
    if (!r.pass) v.detail += r.name + "=" + sci(r.measured) + " ";
  }
  v.pass = v.pass && elapsed < 60.0;
  v.detail += std::to_string(results.size()) + " targets x 50 seeds, max rel err " + sci(worst) +
              " (< 1e-4), quadratic " + sci(quadratic) + " (< 1e-9), " + fmt(elapsed, 1) +
              " s (< 60 s)";
  return v;
}

Verdict criterion_simplex() {
  const auto hier = benchmark_hierarchy();
  std::mt19937_64 rng(2024);
  double worst_column = 0.0, worst_simplex = 0.0;
  bool negative = false;
  std::size_t inputs = 0;
  for (Mode mode : {Mode::LhtF2C, Mode::LhtC2F}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      ModelConfig cfg;
      cfg.mode = mode;
      LhtModel model(hier, cfg, seed);
      const double stretch = 1.0 + double(seed);
      for (auto& p : model.params()) {
        for (auto& v : p.value.values()) v *= stretch;
      }
      for (int i = 0; i < 50; ++i, ++inputs) {
        auto chain = model.predict(random_input(rng, 1.0 + 0.2 * i));
        for (const auto& t : chain.transitions) {
          for (std::size_t j = 0; j < t.cols(); ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < t.rows(); ++r) {
              negative = negative || t(r, j) < 0;
              s += t(r, j);
            }
            worst_column = std::max(worst_column, std::abs(s - 1.0));
          }
        }
        for (const auto& p : chain.probs) {
          double s = 0.0;
          for (double v : p.values()) {
            negative = negative || v < 0;
            s += v;
          }
          worst_simplex = std::max(worst_simplex, std::abs(s - 1.0));
        }
      }
    }
  }
  Verdict v;
  v.pass = inputs >= 1000 && !negative && worst_column <= 1e-6 && worst_simplex <= 1e-6;
  v.detail = std::to_string(inputs) + " inputs (f2c, c2f), max |column sum - 1| " +
             sci(worst_column) + ", max |sum p - 1| " + sci(worst_simplex) + " (<= 1e-6)" +
             (negative ? ", NEGATIVE ENTRY" : "");
  return v;
}

Verdict criterion_theorem1() {
  VerifyOptions opts;
  opts.only = {"theorem1"};
  Verdict v;
  for (const auto& r : run_checks(opts)) {
    v.pass = v.pass && r.pass;
    v.detail += r.name + " " + sci(r.measured) + " < " + sci(r.threshold) +
                (r.pass ? "" : " FAILED " + r.detail) + "; ";
  }
  return v;
}

Verdict criterion_appendixA() {
  auto r = appendixA_check(1000, 0);
  Verdict v;
  v.pass = r.cases == 1000 && r.failures == 0 && r.max_error < 1e-10;
  v.detail = std::to_string(r.cases) + " cases, " + std::to_string(r.failures) +
             " failures, max |NLL - sum CE| " + sci(r.max_error) + " (< 1e-10)";
  return v;
}

Verdict criterion_lemma1() {
  Stopwatch clock;
  const auto& [train_set, test_set] = benchmark();
  auto cfg = lemma1_config(0);
  LhtModel model(train_set.hierarchy, model_config(cfg, train_set.dim), cfg.seed);
  auto result = train(std::move(model), train_set, cfg);
  auto r = measure_lemma1(result.model, test_set);
  const double elapsed = clock.seconds();
  Verdict v;
  v.pass = r.pass && r.max_column_deviation <= kLemma1ColumnTol &&
           r.max_ce_deviation <= kLemma1CeTol && elapsed < 180.0;
  v.detail = "lambda 1e4: max column deviation " + fmt(r.max_column_deviation) +
             " (<= 0.01), coarse CE ";
  for (std::size_t i = 0; i < r.coarse_ce.size(); ++i) {
    v.detail += fmt(r.coarse_ce[i]) + " vs " + fmt(r.target_ce[i]) + " ";
  }
  v.detail += "max deviation " + fmt(r.max_ce_deviation) + " (<= 0.02), " + fmt(elapsed, 1) +
              " s (< 180 s)";
  return v;
}

Verdict criterion_confusion_bounds() {
  const auto hier = benchmark_hierarchy();
  const double lower = -(std::log(4.0) + std::log(2.0));
  std::mt19937_64 rng(77);
  ModelConfig cfg;
  cfg.mode = Mode::LhtF2C;

  double below = 0.0, above = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    LhtModel model(hier, cfg, seed);
    for (auto& p : model.params()) {
      for (auto& v : p.value.values()) v *= 1.0 + 2.0 * double(seed);
    }
    for (int i = 0; i < 100; ++i) {
      std::vector<PredictionChain> one = {model.predict(random_input(rng, 2.0))};
      const double conf = confusion_loss(one);
      below = std::max(below, lower - conf);
      above = std::max(above, conf);
    }
  }

  LhtModel flat(hier, cfg, 0);
  for (const auto& t : flat.transition_heads()) {
    flat.params()[t.weight].value.fill(0.0);
    flat.params()[t.bias].value.fill(0.0);
  }
  std::vector<PredictionChain> flat_chain = {flat.predict(random_input(rng, 1.0))};
  const double flat_err = std::abs(confusion_loss(flat_chain) - lower);

  // Saturated columns: zero weights, one logit per column raised to 1000.
  LhtModel sharp(hier, cfg, 0);
  for (const auto& t : sharp.transition_heads()) {
    auto& bias = sharp.params()[t.bias].value;
    sharp.params()[t.weight].value.fill(0.0);
    bias.fill(0.0);
    const std::size_t rows = bias.size() == 32 ? 4 : 2, cols = bias.size() / rows;
    for (std::size_t j = 0; j < cols; ++j) bias[(j % rows) * cols + j] = 1000.0;
  }
  std::vector<PredictionChain> sharp_chain = {sharp.predict(random_input(rng, 1.0))};
  const double sharp_err = std::abs(confusion_loss(sharp_chain));

  Verdict v;
  v.pass = below <= 0.0 && above <= 0.0 && flat_err <= 1e-9 && sharp_err <= 1e-9;
  v.detail = "1000 inputs: max excursion below -(ln4+ln2) " + sci(below) + ", above 0 " +
             sci(above) + "; zero logits |L - bound| " + sci(flat_err) +
             ", one-hot columns |L| " + sci(sharp_err) + " (<= 1e-9)";
  return v;
}

struct Table {
  std::map<Mode, SeedMean> modes;
  std::map<double, SeedMean> lambdas;  // lht_f2c
};

Verdict criterion_ordering(Table& table) {
  Stopwatch clock;
  const auto& [train_set, test_set] = benchmark();
  for (Mode mode : {Mode::LhtF2C, Mode::LhtC2F, Mode::VanillaSingle, Mode::Vanilla}) {
    table.modes[mode] = mean_over_seeds(train_set, test_set, mode, kDefaultLambda);
  }
  table.lambdas[kDefaultLambda] = table.modes[Mode::LhtF2C];
  const double elapsed = clock.seconds();
  const auto& f2c = table.modes[Mode::LhtF2C];
  const auto& c2f = table.modes[Mode::LhtC2F];
  const auto& single = table.modes[Mode::VanillaSingle];
  const auto& vanilla = table.modes[Mode::Vanilla];
  const double coarse_gain = f2c.acc.back() - single.acc.back();

  Verdict v;
  const bool order1 = f2c.avg >= c2f.avg, order2 = c2f.avg >= single.avg,
             order3 = single.avg >= vanilla.avg, gain = coarse_gain >= 0.005;
  v.pass = order1 && order2 && order3 && gain && elapsed < 900.0;
  v.detail = "f2c " + describe(f2c) + ", c2f " + describe(c2f) + ", vanilla_single " +
             describe(single) + ", vanilla " + describe(vanilla) + "; f2c>=c2f " +
             (order1 ? "yes" : "NO") + ", c2f>=vanilla_single " + (order2 ? "yes" : "NO") +
             ", vanilla_single>=vanilla " + (order3 ? "yes" : "NO") +
             "; coarsest-level gain over vanilla_single " + fmt(100 * coarse_gain, 2) +
             " pts (>= 0.5); " + fmt(elapsed, 1) + " s (< 900 s)";
  return v;
}

Verdict criterion_lambda(Table& table) {
  const auto& [train_set, test_set] = benchmark();
  for (double lambda : {0.0, 100.0}) {
    table.lambdas[lambda] = mean_over_seeds(train_set, test_set, Mode::LhtF2C, lambda);
  }
  if (!table.lambdas.count(kDefaultLambda)) {
    table.lambdas[kDefaultLambda] =
        mean_over_seeds(train_set, test_set, Mode::LhtF2C, kDefaultLambda);
  }
  const auto& l0 = table.lambdas[0.0];
  const auto& l2 = table.lambdas[kDefaultLambda];
  const auto& l100 = table.lambdas[100.0];
  bool every_level = true;
  for (std::size_t k = 0; k < l0.acc.size(); ++k) every_level = every_level && l0.acc[k] <= l2.acc[k];

  Verdict v;
  const bool up = l2.avg >= l0.avg, down = l100.avg <= l2.avg;
  v.pass = up && down && every_level;
  v.detail = "lht_f2c lambda 0 " + describe(l0) + ", lambda 2 " + describe(l2) + ", lambda 100 " +
             describe(l100) + "; avg(2)>=avg(0) " + (up ? "yes" : "NO") + ", avg(100)<=avg(2) " +
             (down ? "yes" : "NO") + ", lambda 0 below lambda 2 at every level " +
             (every_level ? "yes" : "NO");
  return v;
}

Verdict criterion_random_hierarchy(Table& table) {
  const auto& [train_set, test_set] = benchmark();
  if (!table.lambdas.count(kDefaultLambda)) {
    table.lambdas[kDefaultLambda] =
        mean_over_seeds(train_set, test_set, Mode::LhtF2C, kDefaultLambda);
  }
  const auto& truth = table.lambdas[kDefaultLambda];
  SeedMean random;
  random.acc.assign(3, 0.0);
  for (std::uint64_t seed = 0; seed < kRunSeeds; ++seed) {
    const auto hier = randomize(train_set.hierarchy, seed);
    auto r = train_and_evaluate(relabel(train_set, hier), relabel(test_set, hier), Mode::LhtF2C,
                                kDefaultLambda, seed);
    for (std::size_t k = 0; k < 3; ++k) random.acc[k] += r.acc[k] / kRunSeeds;
    random.avg += r.avg_acc / kRunSeeds;
  }
  Verdict v;
  const double fine_change = std::abs(truth.acc[0] - random.acc[0]);
  double min_drop = 1.0;
  for (std::size_t k = 1; k < 3; ++k) min_drop = std::min(min_drop, truth.acc[k] - random.acc[k]);
  v.pass = min_drop >= 0.05 && fine_change < 0.02;
  v.detail = "true " + describe(truth) + ", random " + describe(random) +
             "; smallest coarse drop " + fmt(100 * min_drop, 2) + " pts (>= 5), fine change " +
             fmt(100 * fine_change, 2) + " pts (< 2)";
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict criterion_determinism() {
  const auto root = fs::temp_directory_path() / "lht_acceptance_determinism";
  fs::remove_all(root);
  for (const char* d : {"a", "b", "c"}) fs::create_directories(root / d);
  std::ostringstream sink;
  const std::vector<std::string> args = {"train", "--benchmark", "--mode", "lht_f2c",
                                         "--lambda", "2", "--seed", "3"};
  auto with_out = [&](const char* d) {
    auto a = args;
    a.push_back("--out");
    a.push_back((root / d).string());
    return a;
  };
  int codes = cli::run(with_out("a"), sink, sink);
  codes += cli::run(with_out("b"), sink, sink);
  codes += cli::run({"rerun", "--manifest", (root / "a" / "manifest.json").string(), "--out",
                     (root / "c").string()},
                    sink, sink);
  bool same = codes == 0;
  std::string detail;
  for (const char* f : {"checkpoint.json", "report.json", "history.jsonl"}) {
    const auto ref = slurp(root / "a" / f);
    const bool ok = !ref.empty() && ref == slurp(root / "b" / f) && ref == slurp(root / "c" / f);
    same = same && ok;
    detail += std::string(f) + (ok ? " identical" : " DIFFERS") + ", ";
  }
  Verdict v;
  v.pass = same;
  v.detail = "3 train runs (2 direct, 1 manifest rerun): " + detail + "digest " +
             (fs::exists(root / "a" / "checkpoint.json")
                  ? cli::file_digest(root / "a" / "checkpoint.json")
                  : std::string("n/a"));
  fs::remove_all(root);
  return v;
}

}  // namespace

int main() {
  Table table;
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"gradient correctness", criterion_gradients},
      {"column stochasticity and simplex", criterion_simplex},
      {"naive-transition suite", criterion_theorem1},
      {"likelihood equivalence", criterion_appendixA},
      {"large-lambda limit", criterion_lemma1},
      {"confusion-loss bounds", criterion_confusion_bounds},
      {"mode ordering", [&] { return criterion_ordering(table); }},
      {"lambda sweep shape", [&] { return criterion_lambda(table); }},
      {"random-hierarchy ablation", [&] { return criterion_random_hierarchy(table); }},
      {"determinism", criterion_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    if (!v.pass) ++failed;
    std::printf("criterion %zu %s: %s | %s\n", i + 1, criteria[i].first.c_str(),
                v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
