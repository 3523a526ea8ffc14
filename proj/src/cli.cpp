#include "lht/cli.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "lht/data.hpp"
#include "lht/eval.hpp"
#include "lht/training.hpp"
#include "lht/verify.hpp"

namespace lht::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

void require_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::IoError, "output directory does not exist: " + dir.string());
  }
}

/// Reproduction record: the exact argv, resolved settings, and digests of
/// every input and output file.
class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& args) {
    j_["tool"] = "lht";
    j_["format"] = 1;
    j_["command"] = std::move(command);
    j_["argv"] = args;
    j_["settings"] = json::object();
    j_["inputs"] = json::object();
    j_["outputs"] = json::object();
  }

  json& settings() { return j_["settings"]; }
  void input(const fs::path& path) { j_["inputs"][path.string()] = file_digest(path); }
  void output(const fs::path& path) { j_["outputs"][path.filename().string()] = file_digest(path); }

  void write(const fs::path& dir) { write_text(dir / "manifest.json", j_.dump(2) + "\n"); }

 private:
  json j_;
};

// ---------------------------------------------------------------------------
// Shared flag groups.

struct TrainFlags {
  std::optional<std::string> config;
  std::optional<std::string> mode;
  std::optional<std::string> transition_input;
  std::optional<double> lambda, lr_backbone, lr_heads, momentum, weight_decay;
  std::optional<std::size_t> steps, batch_size, eval_every, hidden_dim, embed_dim;
  std::optional<std::uint64_t> seed;
};

void add_train_flags(CLI::App* app, TrainFlags& f) {
  app->add_option("--config", f.config, "JSON training config; flags override its keys");
  app->add_option("--mode", f.mode, "vanilla | vanilla_single | lht_f2c | lht_c2f | lht_naive")
      ->check(CLI::IsMember({"vanilla", "vanilla_single", "lht_f2c", "lht_c2f", "lht_naive"}));
  app->add_option("--lambda", f.lambda, "confusion-loss weight (default 2)");
  app->add_option("--steps", f.steps, "SGD steps (default 1000)");
  app->add_option("--batch-size", f.batch_size, "mini-batch size (default 64)");
  app->add_option("--lr-backbone", f.lr_backbone, "initial backbone lr (default 0.01)");
  app->add_option("--lr-heads", f.lr_heads, "initial head lr (default 0.1)");
  app->add_option("--momentum", f.momentum, "SGD momentum (default 0.9)");
  app->add_option("--weight-decay", f.weight_decay, "coupled L2 weight decay (default 5e-4)");
  app->add_option("--seed", f.seed, "init and batch-order seed (default 0)");
  app->add_option("--eval-every", f.eval_every, "test-split evaluation period, 0 = off");
  app->add_option("--hidden-dim", f.hidden_dim, "backbone hidden width (default 64)");
  app->add_option("--embed-dim", f.embed_dim, "embedding width, divisible by K (default 60)");
  app->add_option("--transition-input", f.transition_input, "slice | full")
      ->check(CLI::IsMember({"slice", "full"}));
}

TrainConfig resolve(const TrainFlags& f, Manifest& manifest) {
  TrainConfig c;
  if (f.config) {
    c = config_from_json(read_text(*f.config), c);
    manifest.input(*f.config);
  }
  if (f.mode) c.mode = parse_mode(*f.mode);
  if (f.transition_input) c.transition_input = parse_transition_input(*f.transition_input);
  if (f.lambda) c.lambda = *f.lambda;
  if (f.lr_backbone) c.lr_backbone = *f.lr_backbone;
  if (f.lr_heads) c.lr_heads = *f.lr_heads;
  if (f.momentum) c.momentum = *f.momentum;
  if (f.weight_decay) c.weight_decay = *f.weight_decay;
  if (f.steps) c.max_steps = *f.steps;
  if (f.batch_size) c.batch_size = *f.batch_size;
  if (f.eval_every) c.eval_every = *f.eval_every;
  if (f.hidden_dim) c.hidden_dim = *f.hidden_dim;
  if (f.embed_dim) c.embed_dim = *f.embed_dim;
  if (f.seed) c.seed = *f.seed;
  validate(c);
  manifest.settings()["train"] = json::parse(config_to_json(c));
  return c;
}

struct DataFlags {
  std::optional<std::string> dir;
  bool benchmark = false;
  std::uint64_t data_seed = 0;
};

void add_data_flags(CLI::App* app, DataFlags& f) {
  auto* dir = app->add_option("--data", f.dir, "directory with train.csv, test.csv, hierarchy.json");
  auto* bench = app->add_flag("--benchmark", f.benchmark, "generate the built-in benchmark in memory");
  dir->excludes(bench);
  app->add_option("--data-seed", f.data_seed, "benchmark generator seed (default 0)")->needs(bench);
}

std::pair<Dataset, Dataset> load_splits(const DataFlags& f, Manifest& manifest) {
  if (f.benchmark) {
    manifest.settings()["data"] = {{"source", "benchmark"}, {"data_seed", f.data_seed}};
    return generate_synthetic(benchmark_hierarchy(), benchmark_config(f.data_seed));
  }
  if (!f.dir) throw CLI::RequiredError("--data or --benchmark");
  const fs::path dir = *f.dir;
  const fs::path hier_path = dir / "hierarchy.json";
  const fs::path train_path = dir / "train.csv";
  const fs::path test_path = dir / "test.csv";
  const LabelHierarchy hier = load_hierarchy(hier_path);
  auto train = load_csv(train_path, hier, "train");
  auto test = load_csv(test_path, hier, "test");
  if (train.dim != test.dim) {
    throw Error(ErrorCode::DimensionMismatch, "train and test feature counts differ");
  }
  for (const auto& p : {hier_path, train_path, test_path}) manifest.input(p);
  manifest.settings()["data"] = {{"source", "directory"}, {"dir", dir.string()}};
  return {std::move(train), std::move(test)};
}

struct Ablation {
  std::optional<std::size_t> drop_level;
  std::optional<std::uint64_t> random_hierarchy;
};

struct Prepared {
  Dataset train;
  Dataset test;
  Dataset test_full;  // before drop_level, for restoring the removed level
  std::optional<std::size_t> dropped;
};

Prepared prepare(std::pair<Dataset, Dataset> splits, const Ablation& ablation) {
  auto& [train, test] = splits;
  if (ablation.random_hierarchy) {
    const LabelHierarchy random = randomize(train.hierarchy, *ablation.random_hierarchy);
    train = relabel(train, random);
    test = relabel(test, random);
  }
  Prepared p{train, test, test, ablation.drop_level};
  if (ablation.drop_level) {
    p.train = drop_level(train, *ablation.drop_level);
    p.test = drop_level(test, *ablation.drop_level);
  }
  return p;
}

struct RunOutput {
  TrainResult result;
  MetricsReport report;                // over the full hierarchy
  std::optional<MetricsReport> reduced;  // over the trained hierarchy, with drop_level
};

RunOutput train_and_evaluate(const Prepared& data, const TrainConfig& cfg,
                             std::ostream* history) {
  LhtModel model(data.train.hierarchy, model_config(cfg, data.train.dim), cfg.seed);
  std::function<void(const HistoryRecord&)> on_step;
  if (history != nullptr) {
    on_step = [history](const HistoryRecord& r) { *history << history_record_json(r) << "\n"; };
  }
  TrainResult result = train(std::move(model), data.train, cfg, &data.test, on_step);
  MetricsReport report = evaluate(result.model, data.test);
  if (!data.dropped) return RunOutput{std::move(result), std::move(report), std::nullopt};

  std::vector<PredictionChain> restored;
  for (const auto& chain : predict_all(result.model, data.test)) {
    restored.push_back(restore_dropped_level(chain, data.test_full.hierarchy, *data.dropped));
  }
  const auto labels = data.test_full.labels();
  MetricsReport full = evaluate_predictions(data.test_full.hierarchy, restored, labels);
  return RunOutput{std::move(result), std::move(full), std::move(report)};
}

std::string acc_line(const MetricsReport& r) {
  std::string out = "acc";
  char buf[32];
  for (double a : r.acc) {
    std::snprintf(buf, sizeof(buf), " %.4f", a);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), " avg %.4f", r.avg_acc);
  return out + buf;
}

// ---------------------------------------------------------------------------
// Commands.

struct GenDataFlags {
  std::string out;
  std::vector<std::size_t> preset = {8, 4, 2};
  std::optional<std::string> hierarchy;
  std::size_t dim = 16;
  std::size_t train_per_class = 100;
  std::size_t test_per_class = 100;
  double sigma = benchmark_config().noise_sigma;
  std::vector<double> scales;
  std::uint64_t seed = 0;
};

int cmd_gen_data(const GenDataFlags& f, const std::vector<std::string>& args, std::ostream& out) {
  const fs::path dir = f.out;
  require_dir(dir);
  Manifest manifest("gen-data", args);
  LabelHierarchy hier = f.hierarchy ? load_hierarchy(*f.hierarchy) : balanced_hierarchy(f.preset);
  if (f.hierarchy) manifest.input(*f.hierarchy);

  SyntheticConfig cfg;
  cfg.dim = f.dim;
  cfg.train_per_class = f.train_per_class;
  cfg.test_per_class = f.test_per_class;
  cfg.noise_sigma = f.sigma;
  cfg.center_scales = f.scales.empty() ? default_center_scales(hier.num_levels()) : f.scales;
  cfg.seed = f.seed;
  const auto [train, test] = generate_synthetic(hier, cfg);

  manifest.settings()["generator"] = {{"level_sizes", hier.level_sizes()},
                                      {"dim", cfg.dim},
                                      {"train_per_class", cfg.train_per_class},
                                      {"test_per_class", cfg.test_per_class},
                                      {"noise_sigma", cfg.noise_sigma},
                                      {"center_scales", cfg.center_scales},
                                      {"seed", cfg.seed}};
  save_hierarchy(hier, dir / "hierarchy.json");
  save_csv(train, dir / "train.csv");
  save_csv(test, dir / "test.csv");
  for (const char* name : {"hierarchy.json", "train.csv", "test.csv"}) manifest.output(dir / name);
  manifest.write(dir);
  out << "wrote " << train.size() << " train and " << test.size() << " test samples to "
      << dir.string() << "\n";
  return kExitOk;
}

int cmd_train(const DataFlags& data, const TrainFlags& tf, const Ablation& ablation,
              const std::string& out_dir, const std::vector<std::string>& args,
              std::ostream& out) {
  const fs::path dir = out_dir;
  require_dir(dir);
  Manifest manifest("train", args);
  const TrainConfig cfg = resolve(tf, manifest);  // NegativeLambda etc. before any data work
  Prepared prepared = prepare(load_splits(data, manifest), ablation);
  manifest.settings()["ablation"] = {
      {"drop_level", ablation.drop_level ? json(*ablation.drop_level) : json()},
      {"random_hierarchy", ablation.random_hierarchy ? json(*ablation.random_hierarchy) : json()}};

  std::ofstream history(dir / "history.jsonl", std::ios::binary);
  if (!history) throw Error(ErrorCode::IoError, "cannot write " + (dir / "history.jsonl").string());
  RunOutput run = train_and_evaluate(prepared, cfg, &history);
  history.close();

  save_checkpoint(run.result.model, dir / "checkpoint.json");
  save_hierarchy(run.result.model.hierarchy(), dir / "hierarchy.json");
  write_text(dir / "config.json", config_to_json(cfg));
  write_text(dir / "report.json", report_to_json(run.report));
  write_text(dir / "per_class.csv", per_class_csv(run.report));
  std::vector<std::string> written = {"history.jsonl", "checkpoint.json", "hierarchy.json",
                                      "config.json",   "report.json",     "per_class.csv"};
  if (run.reduced) {
    write_text(dir / "report_reduced.json", report_to_json(*run.reduced));
    written.push_back("report_reduced.json");
  }
  if (!run.result.evals.empty()) {
    std::string lines;
    for (const auto& e : run.result.evals) {
      lines += json{{"step", e.step}, {"acc", e.acc}, {"avg_acc", e.avg_acc}}.dump() + "\n";
    }
    write_text(dir / "evals.jsonl", lines);
    written.push_back("evals.jsonl");
  }
  for (const auto& name : written) manifest.output(dir / name);
  manifest.write(dir);
  out << to_string(cfg.mode) << " lambda " << cfg.lambda << " seed " << cfg.seed << ": "
      << acc_line(run.report) << "\n";
  return kExitOk;
}

struct EvaluateFlags {
  std::string checkpoint;
  std::optional<std::string> baseline;
  std::string split = "test";
  std::string out;
};

int cmd_evaluate(const DataFlags& data, const EvaluateFlags& f, const std::vector<std::string>& args,
                 std::ostream& out) {
  const fs::path dir = f.out;
  require_dir(dir);
  Manifest manifest("evaluate", args);
  auto [train, test] = load_splits(data, manifest);
  const Dataset& split = f.split == "train" ? train : test;
  const LhtModel model = load_checkpoint(f.checkpoint, split.hierarchy);
  manifest.input(f.checkpoint);
  const MetricsReport report = evaluate(model, split);
  write_text(dir / "report.json", report_to_json(report));
  write_text(dir / "per_class.csv", per_class_csv(report));
  manifest.output(dir / "report.json");
  manifest.output(dir / "per_class.csv");
  if (f.baseline) {
    const LhtModel base = load_checkpoint(*f.baseline, split.hierarchy);
    manifest.input(*f.baseline);
    const auto delta = per_class_delta(report, evaluate(base, split));
    write_text(dir / "per_class_delta.csv", per_class_delta_csv(delta));
    manifest.output(dir / "per_class_delta.csv");
  }
  manifest.settings()["split"] = f.split;
  manifest.write(dir);
  out << f.split << ": " << acc_line(report) << "\n";
  return kExitOk;
}

struct SweepFlags {
  std::vector<double> lambdas = {0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::size_t workers = 1;
  std::string out;
};

struct RunKey {
  double lambda;
  std::uint64_t seed;
};

int cmd_sweep(const DataFlags& data, const TrainFlags& tf, const SweepFlags& f,
              const std::vector<std::string>& args, std::ostream& out) {
  const fs::path dir = f.out;
  require_dir(dir);
  if (f.lambdas.empty() || f.seeds.empty()) {
    throw Error(ErrorCode::InvalidConfig, "sweep needs at least one lambda and one seed");
  }
  for (double l : f.lambdas) {
    if (!(l >= 0.0)) throw Error(ErrorCode::NegativeLambda, "lambda " + std::to_string(l));
  }
  Manifest manifest("sweep-lambda", args);
  const TrainConfig base = resolve(tf, manifest);
  const Prepared prepared = prepare(load_splits(data, manifest), {});

  std::vector<RunKey> keys;
  for (double l : f.lambdas) {
    for (std::uint64_t s : f.seeds) keys.push_back({l, s});
  }
  std::vector<std::vector<double>> acc(keys.size());
  std::vector<double> avg(keys.size());
  std::vector<std::exception_ptr> errors(keys.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < keys.size(); i = next++) {
      try {
        TrainConfig cfg = base;
        cfg.lambda = keys[i].lambda;
        cfg.seed = keys[i].seed;
        const RunOutput run = train_and_evaluate(prepared, cfg, nullptr);
        acc[i] = run.report.acc;
        avg[i] = run.report.avg_acc;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < std::max<std::size_t>(f.workers, 1); ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const std::size_t k_levels = prepared.test.hierarchy.num_levels();
  char buf[64];
  std::string runs_csv = "lambda,seed";
  for (std::size_t l = 1; l <= k_levels; ++l) runs_csv += ",acc" + std::to_string(l);
  runs_csv += ",avg_acc\n";
  json runs = json::array();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%llu", keys[i].lambda,
                  static_cast<unsigned long long>(keys[i].seed));
    runs_csv += buf;
    for (double a : acc[i]) {
      std::snprintf(buf, sizeof(buf), ",%.17g", a);
      runs_csv += buf;
    }
    std::snprintf(buf, sizeof(buf), ",%.17g\n", avg[i]);
    runs_csv += buf;
    runs.push_back({{"lambda", keys[i].lambda}, {"seed", keys[i].seed}, {"acc", acc[i]},
                    {"avg_acc", avg[i]}});
  }

  // Mean and sample standard deviation per lambda.
  std::string table = "lambda,runs";
  for (std::size_t l = 1; l <= k_levels; ++l) {
    table += ",acc" + std::to_string(l) + "_mean,acc" + std::to_string(l) + "_std";
  }
  table += ",avg_acc_mean,avg_acc_std\n";
  const std::size_t n = f.seeds.size();
  auto stats = [&](std::size_t first, auto value) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = first; i < first + n; ++i) mean += value(i);
    mean /= static_cast<double>(n);
    for (std::size_t i = first; i < first + n; ++i) sq += (value(i) - mean) * (value(i) - mean);
    const double sd = n > 1 ? std::sqrt(sq / static_cast<double>(n - 1)) : 0.0;
    std::snprintf(buf, sizeof(buf), ",%.17g,%.17g", mean, sd);
    return std::pair{mean, sd};
  };
  for (std::size_t li = 0; li < f.lambdas.size(); ++li) {
    const std::size_t first = li * n;
    std::snprintf(buf, sizeof(buf), "%.17g,%zu", f.lambdas[li], n);
    table += buf;
    for (std::size_t l = 0; l < k_levels; ++l) {
      stats(first, [&](std::size_t i) { return acc[i][l]; });
      table += buf;
    }
    const auto [mean, sd] = stats(first, [&](std::size_t i) { return avg[i]; });
    table += buf;
    table += "\n";
    std::snprintf(buf, sizeof(buf), "lambda %-8g avg_acc %.4f +- %.4f\n", f.lambdas[li], mean, sd);
    out << buf;
  }

  write_text(dir / "runs.csv", runs_csv);
  write_text(dir / "sweep.csv", table);
  manifest.output(dir / "runs.csv");
  manifest.output(dir / "sweep.csv");
  manifest.settings()["lambdas"] = f.lambdas;
  manifest.settings()["seeds"] = f.seeds;
  manifest.settings()["runs"] = std::move(runs);
  manifest.write(dir);
  return kExitOk;
}

struct VerifyFlags {
  std::vector<std::string> only;
  std::uint64_t seed = 0;
  std::size_t grad_seeds = 50;
  std::size_t appendix_cases = 1000;
  std::optional<std::string> out;
};

int cmd_verify(const VerifyFlags& f, const std::vector<std::string>& args, std::ostream& out) {
  if (f.out) require_dir(*f.out);
  VerifyOptions options;
  options.only = f.only;
  options.seed = f.seed;
  options.grad_seeds = f.grad_seeds;
  options.appendix_cases = f.appendix_cases;
  const auto results = run_checks(options);
  std::string lines;
  bool ok = true;
  for (const auto& r : results) {
    lines += to_json(r) + "\n";
    ok = ok && r.pass;
  }
  out << lines;
  if (f.out) {
    const fs::path dir = *f.out;
    Manifest manifest("verify", args);
    manifest.settings()["only"] = f.only;
    manifest.settings()["seed"] = f.seed;
    write_text(dir / "verify.jsonl", lines);
    manifest.output(dir / "verify.jsonl");
    manifest.write(dir);
  }
  return ok ? kExitOk : kExitVerifyFailed;
}

int cmd_rerun(const std::string& manifest_path, const std::string& out_dir, std::ostream& out,
              std::ostream& err) {
  json j;
  try {
    j = json::parse(read_text(manifest_path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, manifest_path + ": " + e.what());
  }
  if (!j.contains("argv") || !j["argv"].is_array() || j["argv"].empty()) {
    throw Error(ErrorCode::ParseError, manifest_path + ": no argv");
  }
  auto argv = j["argv"].get<std::vector<std::string>>();
  if (argv.front() == "rerun") throw Error(ErrorCode::InvalidConfig, "manifest is itself a rerun");
  for (const auto& [path, digest] : j["inputs"].items()) {
    if (file_digest(path) != digest.get<std::string>()) {
      throw Error(ErrorCode::InvalidConfig, "input changed since the manifest was written: " + path);
    }
  }
  bool replaced = false;
  for (std::size_t i = 0; i < argv.size(); ++i) {
    if (argv[i] == "--out" && i + 1 < argv.size()) {
      argv[i + 1] = out_dir;
      replaced = true;
    } else if (argv[i].starts_with("--out=")) {
      argv[i] = "--out=" + out_dir;
      replaced = true;
    }
  }
  if (!replaced) {
    argv.push_back("--out");
    argv.push_back(out_dir);
  }
  return run(argv, out, err);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Label hierarchy transition toolkit", "lht"};
  app.require_subcommand(1);

  GenDataFlags gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "write a synthetic hierarchical dataset");
  gen_cmd->add_option("--out", gen.out, "existing output directory")->required();
  auto* preset = gen_cmd->add_option("--preset", gen.preset, "balanced level sizes, finest first")
                     ->delimiter(',');
  gen_cmd->add_option("--hierarchy", gen.hierarchy, "hierarchy JSON file")->excludes(preset);
  gen_cmd->add_option("--dim", gen.dim, "feature dimension (default 16)");
  gen_cmd->add_option("--train-per-class", gen.train_per_class, "train samples per fine class");
  gen_cmd->add_option("--test-per-class", gen.test_per_class, "test samples per fine class");
  gen_cmd->add_option("--sigma", gen.sigma, "sample noise sigma");
  gen_cmd->add_option("--scales", gen.scales, "center scales, finest first")->delimiter(',');
  gen_cmd->add_option("--seed", gen.seed, "generator seed (default 0)");

  DataFlags train_data;
  TrainFlags train_flags;
  Ablation ablation;
  std::string train_out;
  auto* train_cmd = app.add_subcommand("train", "train one model and evaluate it on the test split");
  add_data_flags(train_cmd, train_data);
  add_train_flags(train_cmd, train_flags);
  train_cmd->add_option("--drop-level", ablation.drop_level, "remove interior level k, restore it at test");
  train_cmd->add_option("--random-hierarchy", ablation.random_hierarchy,
                        "replace the parent maps with a random hierarchy drawn from SEED");
  train_cmd->add_option("--out", train_out, "existing output directory")->required();

  DataFlags eval_data;
  EvaluateFlags eval_flags;
  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint");
  add_data_flags(eval_cmd, eval_data);
  eval_cmd->add_option("--checkpoint", eval_flags.checkpoint, "checkpoint.json")->required();
  eval_cmd->add_option("--baseline", eval_flags.baseline, "second checkpoint for per-class deltas");
  eval_cmd->add_option("--split", eval_flags.split, "train | test")
      ->check(CLI::IsMember({"train", "test"}));
  eval_cmd->add_option("--out", eval_flags.out, "existing output directory")->required();

  DataFlags sweep_data;
  TrainFlags sweep_train;
  SweepFlags sweep;
  auto* sweep_cmd = app.add_subcommand("sweep-lambda", "avg_acc against lambda over seeds");
  add_data_flags(sweep_cmd, sweep_data);
  add_train_flags(sweep_cmd, sweep_train);
  sweep_cmd->add_option("--lambdas", sweep.lambdas, "comma-separated lambda list")->delimiter(',');
  sweep_cmd->add_option("--seeds", sweep.seeds, "comma-separated seed list")->delimiter(',');
  sweep_cmd->add_option("--workers", sweep.workers, "parallel training runs (default 1)")
      ->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--out", sweep.out, "existing output directory")->required();

  VerifyFlags verify;
  auto* verify_cmd = app.add_subcommand("verify", "gradient, naive-transition, large-lambda and likelihood checks");
  verify_cmd->add_option("--only", verify.only, "check families to run")
      ->delimiter(',')
      ->check(CLI::IsMember(check_families()));
  verify_cmd->add_option("--seed", verify.seed, "base seed (default 0)");
  verify_cmd->add_option("--grad-seeds", verify.grad_seeds, "seeds per gradient target (default 50)");
  verify_cmd->add_option("--appendix-cases", verify.appendix_cases, "random cases (default 1000)");
  verify_cmd->add_option("--out", verify.out, "optional output directory");

  std::string rerun_manifest, rerun_out;
  auto* rerun_cmd = app.add_subcommand("rerun", "repeat the command recorded in a manifest");
  rerun_cmd->add_option("--manifest", rerun_manifest, "manifest.json")->required();
  rerun_cmd->add_option("--out", rerun_out, "existing output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(gen, args, out);
    if (train_cmd->parsed()) {
      return cmd_train(train_data, train_flags, ablation, train_out, args, out);
    }
    if (eval_cmd->parsed()) return cmd_evaluate(eval_data, eval_flags, args, out);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_data, sweep_train, sweep, args, out);
    if (verify_cmd->parsed()) return cmd_verify(verify, args, out);
    if (rerun_cmd->parsed()) return cmd_rerun(rerun_manifest, rerun_out, out, err);
  } catch (const CLI::Error& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace lht::cli
