#include "lht/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "json.hpp"
#include "lht/eval.hpp"
#include "lht/losses.hpp"

namespace lht {

std::string to_json(const CheckResult& r) {
  nlohmann::ordered_json j;
  j["name"] = r.name;
  j["pass"] = r.pass;
  j["measured"] = r.measured;
  j["threshold"] = r.threshold;
  j["margin"] = r.margin();
  j["seed"] = r.seed;
  if (!r.detail.empty()) j["detail"] = r.detail;
  return j.dump();
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradDenomFloor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

Tensor random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  Tensor t(rows, cols);
  for (auto& v : t.values()) v = gauss(rng);
  return t;
}

// Entries with |v| in [0.1, 1] and random sign; keeps relu away from its kink
// and positive variants away from the log clamp.
Tensor away_from_zero(std::size_t n, std::mt19937_64& rng, bool positive) {
  std::uniform_real_distribution<double> mag(0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  Tensor t(n, 1);
  for (auto& v : t.values()) v = (positive || sign(rng)) ? mag(rng) : -mag(rng);
  return t;
}

// Scalar <w, v> for a vector node.
Var contract(Tape& tape, Var v, std::mt19937_64& rng) {
  const std::size_t n = tape.value(v).size();
  const Var flat = tape.reshape(v, n, 1);
  return tape.matvec(tape.constant(random_tensor(1, n, rng)), flat);
}

using Objective = std::function<double(Gradients*)>;

// Max relative error of the analytic gradient produced by `objective` against
// central differences over every coordinate of `params`.
double compare(ParameterSet& params, const Objective& objective, double h) {
  Gradients analytic(params);
  analytic.zero();
  objective(&analytic);
  double worst = 0.0;
  for (ParamId id = 0; id < params.size(); ++id) {
    Tensor& value = params[id].value;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + h;
      const double up = objective(nullptr);
      value[i] = saved - h;
      const double down = objective(nullptr);
      value[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw Error(ErrorCode::NumericalError, "grad_check: non-finite objective");
      }
      worst = std::max(worst, relative_error(analytic[id][i], (up - down) / (2.0 * h)));
    }
  }
  return worst;
}

using Builder = std::function<Var(Tape&, std::mt19937_64&)>;

double check_primitive(ParameterSet& params, const Builder& build, std::uint64_t seed, double h) {
  const Objective objective = [&](Gradients* grads) {
    std::mt19937_64 rng(seed ^ 0xc0ffeeULL);  // same contraction weights every call
    Tape tape(&params);
    const Var root = build(tape, rng);
    if (grads != nullptr) tape.backward(root, *grads);
    return tape.scalar(root);
  };
  return compare(params, objective, h);
}

double check_loss(Mode mode, std::uint64_t seed, double h) {
  std::mt19937_64 rng(seed);
  const LabelHierarchy hier = balanced_hierarchy({8, 4, 2});
  ModelConfig cfg;
  cfg.input_dim = 4;
  cfg.hidden_dim = 8;
  cfg.embed_dim = 6;
  cfg.mode = mode;
  cfg.transition_input = (seed % 2 == 0) ? TransitionInput::Slice : TransitionInput::Full;
  LhtModel model(hier, cfg, seed);
  // Zero biases put a sample with an all-dead hidden layer exactly on the
  // ReLU kink of every embedding unit; check at a generic point instead.
  for (auto& p : model.params()) {
    if (p.name.ends_with(".bias")) p.value = random_tensor(p.value.rows(), p.value.cols(), rng, 0.5);
  }

  Dataset data{hier, {}, cfg.input_dim, "grad"};
  std::uniform_int_distribution<ClassIndex> fine(0, hier.level_size(1) - 1);
  for (int n = 0; n < 3; ++n) {
    data.samples.push_back(Sample{random_tensor(cfg.input_dim, 1, rng), backtrack(hier, fine(rng))});
  }
  const std::vector<std::size_t> batch = {0, 1, 2};
  const Objective objective = [&](Gradients* grads) {
    Gradients scratch;
    Gradients& out = grads != nullptr ? *grads : (scratch = Gradients(model.params()));
    return batch_gradient(model, data, batch, kDefaultLambda, out).mean_total();
  };
  return compare(model.params(), objective, h);
}

const std::vector<std::string>& primitive_targets() {
  static const std::vector<std::string> names = {
      "affine", "relu",       "softmax",  "column_softmax", "reshape", "slice", "matvec",
      "column", "cross_entropy", "neg_entropy", "add",         "scale",   "quadratic"};
  return names;
}

double check_named_primitive(std::string_view target, std::uint64_t seed, double h) {
  std::mt19937_64 rng(seed);
  ParameterSet params;
  Builder build;
  const auto g = ParamGroup::Head;
  if (target == "affine") {
    const auto x = params.add("x", g, random_tensor(5, 1, rng));
    const auto w = params.add("w", g, random_tensor(4, 5, rng));
    const auto b = params.add("b", g, random_tensor(4, 1, rng));
    build = [=](Tape& t, std::mt19937_64& r) {
      return contract(t, t.affine(t.parameter(x), t.parameter(w), t.parameter(b)), r);
    };
  } else if (target == "relu") {
    const auto x = params.add("x", g, away_from_zero(6, rng, false));
    build = [=](Tape& t, std::mt19937_64& r) { return contract(t, t.relu(t.parameter(x)), r); };
  } else if (target == "softmax") {
    const auto z = params.add("z", g, random_tensor(6, 1, rng, 2.0));
    build = [=](Tape& t, std::mt19937_64& r) { return contract(t, t.softmax(t.parameter(z)), r); };
  } else if (target == "column_softmax") {
    const auto z = params.add("z", g, random_tensor(4, 3, rng, 2.0));
    build = [=](Tape& t, std::mt19937_64& r) {
      return contract(t, t.column_softmax(t.parameter(z)), r);
    };
  } else if (target == "reshape") {
    const auto x = params.add("x", g, random_tensor(2, 3, rng));
    build = [=](Tape& t, std::mt19937_64& r) {
      return contract(t, t.softmax(t.reshape(t.parameter(x), 6, 1)), r);
    };
  } else if (target == "slice") {
    const auto x = params.add("x", g, random_tensor(7, 1, rng));
    build = [=](Tape& t, std::mt19937_64& r) {
      return contract(t, t.slice(t.parameter(x), 2, 3), r);
    };
  } else if (target == "matvec") {
    const auto m = params.add("m", g, random_tensor(3, 4, rng));
    const auto v = params.add("v", g, random_tensor(4, 1, rng));
    build = [=](Tape& t, std::mt19937_64& r) {
      return contract(t, t.matvec(t.parameter(m), t.parameter(v)), r);
    };
  } else if (target == "column") {
    const auto m = params.add("m", g, random_tensor(3, 4, rng));
    build = [=](Tape& t, std::mt19937_64& r) {
      return contract(t, t.column(t.parameter(m), 2), r);
    };
  } else if (target == "cross_entropy") {
    const auto p = params.add("p", g, away_from_zero(5, rng, true));
    const ClassIndex label = std::uniform_int_distribution<ClassIndex>(0, 4)(rng);
    build = [=](Tape& t, std::mt19937_64&) { return t.cross_entropy(t.parameter(p), label); };
  } else if (target == "neg_entropy") {
    const auto p = params.add("p", g, away_from_zero(5, rng, true));
    build = [=](Tape& t, std::mt19937_64&) { return t.neg_entropy(t.parameter(p)); };
  } else if (target == "add") {
    const auto a = params.add("a", g, random_tensor(4, 1, rng));
    const auto b = params.add("b", g, random_tensor(4, 1, rng));
    build = [=](Tape& t, std::mt19937_64& r) {
      return contract(t, t.add(t.parameter(a), t.parameter(b)), r);
    };
  } else if (target == "scale") {
    const auto a = params.add("a", g, random_tensor(4, 1, rng));
    build = [=](Tape& t, std::mt19937_64& r) {
      return contract(t, t.scale(t.parameter(a), -1.7), r);
    };
  } else if (target == "quadratic") {
    // x^T A x with A diagonally dominant, so no gradient coordinate is tiny.
    const auto x = params.add("x", g, away_from_zero(5, rng, false));
    Tensor a = random_tensor(5, 5, rng, 0.05);
    for (std::size_t i = 0; i < 5; ++i) a(i, i) += 2.0;
    build = [=](Tape& t, std::mt19937_64&) {
      const Var xv = t.parameter(x);
      return t.matvec(t.reshape(xv, 1, 5), t.matvec(t.constant(a), xv));
    };
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown grad_check target '" + std::string(target) + "'");
  }
  return check_primitive(params, build, seed, h);
}

}  // namespace

std::vector<std::string> grad_check_targets() {
  std::vector<std::string> out = primitive_targets();
  for (Mode m : {Mode::Vanilla, Mode::VanillaSingle, Mode::LhtF2C, Mode::LhtC2F, Mode::LhtNaive}) {
    out.push_back("loss:" + std::string(to_string(m)));
  }
  return out;
}

double grad_check(std::string_view target, std::uint64_t seed, double h) {
  if (target.starts_with("loss:")) {
    Mode mode;
    try {
      mode = parse_mode(target.substr(5));
    } catch (const Error&) {
      throw Error(ErrorCode::InvalidConfig, "unknown grad_check target '" + std::string(target) + "'");
    }
    return check_loss(mode, seed, h);
  }
  return check_named_primitive(target, seed, h);
}

// ---------------------------------------------------------------------------

namespace {

// Probability of each level-k class as the sum of its fine descendants.
std::vector<Tensor> descendant_sums(const LabelHierarchy& hier, const Tensor& fine) {
  std::vector<Tensor> out;
  for (std::size_t level = 1; level <= hier.num_levels(); ++level) {
    out.emplace_back(hier.level_size(level), 1);
  }
  for (ClassIndex f = 0; f < fine.size(); ++f) {
    const LabelChain chain = backtrack(hier, f);
    for (std::size_t l = 0; l < chain.size(); ++l) out[l][chain[l]] += fine[f];
  }
  return out;
}

// L_CE of one sample when p^k = Tnaive^k p^{k-1}.
double naive_chain_ce(const LabelHierarchy& hier, const Tensor& fine_logits, const LabelChain& y) {
  Tensor p = softmax(fine_logits);
  double total = cross_entropy(p, y[0]);
  for (std::size_t level = 2; level <= hier.num_levels(); ++level) {
    p = matvec(naive_transition(hier, level).entries, p);
    total += cross_entropy(p, y[level - 1]);
  }
  return total;
}

// Indices of grid values within a relative 1e-12 of the minimum.
std::vector<std::size_t> argmin_set(const std::vector<double>& values) {
  const double best = *std::min_element(values.begin(), values.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] - best <= 1e-12 * std::max(1.0, std::abs(best))) out.push_back(i);
  }
  return out;
}

}  // namespace

Theorem1Report theorem1_oracle(std::uint64_t seed, std::size_t num_cases) {
  Theorem1Report r;
  std::mt19937_64 rng(seed);
  const LabelHierarchy hier = balanced_hierarchy({8, 4, 2});
  const std::size_t k_levels = hier.num_levels();
  std::uniform_int_distribution<ClassIndex> fine(0, hier.level_size(1) - 1);

  // (a) naive-mode network output against descendant sums of its p^1.
  ModelConfig cfg;
  cfg.input_dim = 6;
  cfg.hidden_dim = 10;
  cfg.embed_dim = 9;
  cfg.mode = Mode::LhtNaive;
  for (std::size_t c = 0; c < num_cases; ++c) {
    LhtModel model(hier, cfg, seed * 1000 + c);
    // Scale the fine head so p^1 is far from uniform.
    for (auto& p : model.params()) {
      for (auto& v : p.value.values()) v *= 4.0;
    }
    const PredictionChain chain = model.predict(random_tensor(cfg.input_dim, 1, rng, 2.0));
    const LabelChain y = backtrack(hier, fine(rng));
    const auto sums = descendant_sums(hier, chain.probs[0]);
    for (std::size_t l = 1; l < k_levels; ++l) {
      const double direct = -std::log(std::max(sums[l][y[l]], kLogClamp));
      r.identity_error =
          std::max(r.identity_error, std::abs(cross_entropy(chain.probs[l], y[l]) - direct));
    }
  }

  // (b) correct-class margin m with all other fine logits at zero.
  const LabelChain y = backtrack(hier, fine(rng));
  r.monotone = true;
  r.bounded = true;
  for (double m : {5.0, 10.0, 20.0}) {
    Tensor logits(hier.level_size(1), 1);
    logits[y[0]] = m;
    const double loss = naive_chain_ce(hier, logits, y);
    const double bound = static_cast<double>(k_levels) * cross_entropy(softmax(logits), y[0]);
    if (!r.margin_loss.empty() && !(loss < r.margin_loss.back())) r.monotone = false;
    if (loss > bound) r.bounded = false;
    r.margins.push_back(m);
    r.margin_loss.push_back(loss);
    r.margin_bound.push_back(bound);
  }

  // (c) one sample of class 0 on [4,2]; fine logits (a, b, 0, 0) where b is
  // the sibling of the true class.
  const LabelHierarchy toy = balanced_hierarchy({4, 2});
  const LabelChain toy_y = backtrack(toy, 0);
  std::vector<double> grid;
  for (int i = -100; i <= 100; ++i) grid.push_back(i / 10.0);
  std::vector<double> chain_ce, fine_ce;
  for (double a : grid) {
    for (double b : grid) {
      const Tensor logits = Tensor::vector({a, b, 0.0, 0.0});
      chain_ce.push_back(naive_chain_ce(toy, logits, toy_y));
      fine_ce.push_back(cross_entropy(softmax(logits), toy_y[0]));
    }
  }
  const auto chain_set = argmin_set(chain_ce);
  const auto fine_set = argmin_set(fine_ce);
  std::vector<std::size_t> diff;
  std::set_symmetric_difference(chain_set.begin(), chain_set.end(), fine_set.begin(), fine_set.end(),
                                std::back_inserter(diff));
  r.argmin_disagreements = diff.size();

  r.sweep_decreasing = true;
  double prev_chain = INFINITY, prev_fine = INFINITY;
  for (double m : grid) {
    const Tensor logits = Tensor::vector({m, 0.0, 0.0, 0.0});
    const double v_chain = naive_chain_ce(toy, logits, toy_y);
    const double v_fine = cross_entropy(softmax(logits), toy_y[0]);
    if (!(v_chain < prev_chain) || !(v_fine < prev_fine)) r.sweep_decreasing = false;
    prev_chain = v_chain;
    prev_fine = v_fine;
  }
  return r;
}

// ---------------------------------------------------------------------------

Lemma1Report measure_lemma1(const LhtModel& model, const Dataset& data) {
  if (!has_learned_transitions(model.mode())) {
    throw Error(ErrorCode::ModeMismatch, "lemma1 needs learned transitions, got " +
                                             std::string(to_string(model.mode())));
  }
  if (data.samples.empty()) throw Error(ErrorCode::InvalidConfig, "lemma1 needs samples");
  const LabelHierarchy& hier = model.hierarchy();
  const std::size_t k_levels = hier.num_levels();
  const bool f2c = model.mode() == Mode::LhtF2C;

  Lemma1Report r;
  r.column_deviation.assign(k_levels - 1, 0.0);
  r.coarse_ce.assign(k_levels - 1, 0.0);
  for (std::size_t i = 0; i + 1 < k_levels; ++i) {
    // Level produced by transitions[i]: i + 2 upward for f2c, i + 1 downward for c2f.
    r.target_ce.push_back(std::log(static_cast<double>(hier.level_size(f2c ? i + 2 : i + 1))));
  }
  for (const auto& s : data.samples) {
    const PredictionChain chain = model.predict(s.features);
    for (std::size_t i = 0; i < chain.transitions.size(); ++i) {
      const Tensor& t = chain.transitions[i];
      const double uniform = 1.0 / static_cast<double>(t.rows());
      for (double v : t.values()) {
        r.column_deviation[i] = std::max(r.column_deviation[i], std::abs(v - uniform));
      }
      const std::size_t level0 = f2c ? i + 1 : i;
      r.coarse_ce[i] += cross_entropy(chain.probs[level0], s.labels[level0]);
    }
  }
  for (std::size_t i = 0; i + 1 < k_levels; ++i) {
    r.coarse_ce[i] /= static_cast<double>(data.size());
    r.max_column_deviation = std::max(r.max_column_deviation, r.column_deviation[i]);
    r.max_ce_deviation = std::max(r.max_ce_deviation, std::abs(r.coarse_ce[i] - r.target_ce[i]));
  }
  r.pass = r.max_column_deviation < kLemma1ColumnTol && r.max_ce_deviation < kLemma1CeTol;
  return r;
}

Lemma1Report lemma1_check(const LhtModel& model, const Dataset& data) {
  Lemma1Report r = measure_lemma1(model, data);
  if (!r.pass) {
    throw Error(ErrorCode::NotConverged,
                "column deviation " + std::to_string(r.max_column_deviation) + ", CE deviation " +
                    std::to_string(r.max_ce_deviation));
  }
  return r;
}

TrainConfig lemma1_config(std::uint64_t seed, double lambda) {
  TrainConfig c;
  c.seed = seed;
  c.mode = Mode::LhtF2C;
  c.lambda = lambda;
  c.lr_heads = 20.0 / lambda;
  c.lr_backbone = 0.1 / lambda;
  c.max_steps = 2000;
  return c;
}

// ---------------------------------------------------------------------------

AppendixAReport appendixA_check(std::size_t n, std::uint64_t seed) {
  AppendixAReport r;
  std::mt19937_64 rng(seed);
  const LabelHierarchy hier = balanced_hierarchy({8, 4, 2});
  for (std::size_t c = 0; c < n; ++c) {
    double product = 1.0;
    double ce_sum = 0.0;
    for (std::size_t level = 1; level <= hier.num_levels(); ++level) {
      const std::size_t size = hier.level_size(level);
      const Tensor p = softmax(random_tensor(size, 1, rng, 2.0));
      const ClassIndex y = std::uniform_int_distribution<ClassIndex>(0, size - 1)(rng);
      product *= p[y];
      ce_sum += cross_entropy(p, y);
    }
    const double err = std::abs(-std::log(product) - ce_sum);
    ++r.cases;
    if (!(err < kAppendixATol)) ++r.failures;
    r.max_error = std::max(r.max_error, err);
  }
  return r;
}

// ---------------------------------------------------------------------------

std::vector<std::string> check_families() { return {"grad_check", "theorem1", "lemma1", "appendixA"}; }

namespace {

CheckResult verdict(std::string name, double measured, double threshold, std::uint64_t seed,
                    bool extra = true, std::string detail = {}) {
  return CheckResult{std::move(name), extra && measured < threshold, measured, threshold, seed,
                     std::move(detail)};
}

std::string join(const std::vector<double>& v) {
  std::string out;
  char buf[32];
  for (double x : v) {
    std::snprintf(buf, sizeof(buf), "%s%.6g", out.empty() ? "" : " ", x);
    out += buf;
  }
  return out;
}

}  // namespace

std::vector<CheckResult> run_checks(const VerifyOptions& options) {
  const auto families = check_families();
  for (const auto& name : options.only) {
    if (std::find(families.begin(), families.end(), name) == families.end()) {
      throw Error(ErrorCode::InvalidConfig, "unknown check '" + name + "'");
    }
  }
  const auto wanted = [&](const char* name) {
    return options.only.empty() ||
           std::find(options.only.begin(), options.only.end(), name) != options.only.end();
  };
  const std::uint64_t seed = options.seed;
  std::vector<CheckResult> out;

  if (wanted("grad_check")) {
    for (const auto& target : grad_check_targets()) {
      double worst = 0.0;
      for (std::size_t s = 0; s < options.grad_seeds; ++s) {
        worst = std::max(worst, grad_check(target, seed * 7919 + s));
      }
      const double threshold = target == "quadratic" ? 1e-9 : kGradTolerance;
      out.push_back(verdict("grad_check:" + target, worst, threshold, seed, true,
                            std::to_string(options.grad_seeds) + " seeds"));
    }
  }

  if (wanted("theorem1")) {
    const Theorem1Report t = theorem1_oracle(seed);
    out.push_back(verdict("theorem1:identity", t.identity_error, 1e-12, seed));
    out.push_back(verdict("theorem1:margin", t.margin_loss.back(), 1e-7, seed,
                          t.monotone && t.bounded,
                          "loss at margins 5/10/20: " + join(t.margin_loss) +
                              (t.monotone ? "" : " not monotone") +
                              (t.bounded ? "" : " exceeds K*CE_fine")));
    out.push_back(verdict("theorem1:grid", static_cast<double>(t.argmin_disagreements), 1.0, seed,
                          t.sweep_decreasing,
                          t.sweep_decreasing ? "" : "margin sweep not strictly decreasing"));
  }

  if (wanted("lemma1")) {
    const auto [train_set, test_set] = generate_synthetic(benchmark_hierarchy(), benchmark_config(seed));
    const TrainConfig cfg = lemma1_config(seed);
    LhtModel model(train_set.hierarchy, model_config(cfg, train_set.dim), seed);
    const auto trained = train(std::move(model), train_set, cfg);
    const Lemma1Report r = measure_lemma1(trained.model, test_set);
    out.push_back(verdict("lemma1:columns", r.max_column_deviation, kLemma1ColumnTol, seed, true,
                          "per matrix: " + join(r.column_deviation)));
    out.push_back(verdict("lemma1:coarse_ce", r.max_ce_deviation, kLemma1CeTol, seed, true,
                          "CE " + join(r.coarse_ce) + " vs " + join(r.target_ce)));
  }

  if (wanted("appendixA")) {
    const AppendixAReport a = appendixA_check(options.appendix_cases, seed);
    out.push_back(verdict("appendixA", a.max_error, kAppendixATol, seed, a.failures == 0,
                          std::to_string(a.cases) + " cases, " + std::to_string(a.failures) +
                              " failures"));
  }
  return out;
}

}  // namespace lht
