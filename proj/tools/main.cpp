// Batch experiment runner: train | eval | benchmark | gradcheck.
// Exit codes: 0 success, 1 validation error, 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "evidentia/config.hpp"
#include "evidentia/evaluation.hpp"
#include "evidentia/gradcheck.hpp"
#include "evidentia/training.hpp"

namespace fs = std::filesystem;
using namespace evidentia;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  int jobs = 1;
  uint64_t seed = 0;
  bool seed_set = false;
};

ExperimentConfig load_config(const CommonOpts& opts) {
  ExperimentConfig cfg = load_experiment_config(opts.config_path);
  if (opts.seed_set) cfg.seed = opts.seed;
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  return cfg;
}

// Overwrites only happen with identical bytes for identical config+seed,
// so outputs stay idempotent.
void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << content;
}

struct LoadedExperiment {
  Vocabulary vocab;
  PreparedSplit train, val, test;
};

LoadedExperiment prepare(const ExperimentConfig& cfg) {
  Dataset data = load_dataset(cfg.data_dir, cfg.task);
  std::unordered_map<std::string, std::vector<double>> pretrained;
  if (!cfg.pretrained_vectors.empty())
    pretrained = load_pretrained(cfg.pretrained_vectors, cfg.model.embed_dim);

  std::vector<std::vector<std::string>> train_tokens, extra;
  auto collect = [](const Split& s, std::vector<std::vector<std::string>>& into) {
    for (const auto& inst : s.instances) {
      into.push_back(tokenize(inst.hypothesis));
      for (const auto& e : inst.evidence) into.push_back(tokenize(e));
    }
  };
  collect(data.train, train_tokens);
  collect(data.val, extra);
  collect(data.test, extra);

  LoadedExperiment lx;
  lx.vocab = Vocabulary::build(train_tokens, cfg.model.adaptable_k, pretrained,
                               cfg.model.embed_dim, extra);
  lx.train = prepare_split(data.train, lx.vocab, cfg.model);
  lx.val = prepare_split(data.val, lx.vocab, cfg.model);
  lx.test = prepare_split(data.test, lx.vocab, cfg.model);
  return lx;
}

std::string train_log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream out;
  out << "epoch,train_loss,train_acc,val_acc\n";
  out << std::fixed << std::setprecision(6);
  for (const auto& row : log)
    out << row.epoch << ',' << row.train_loss << ',' << row.train_acc << ',' << row.val_acc
        << "\n";
  return out.str();
}

int cmd_train(const CommonOpts& opts) {
  ExperimentConfig cfg = load_config(opts);
  fs::path out_dir(cfg.out_dir);

  LoadedExperiment lx = prepare(cfg);
  Model model(cfg.model, lx.vocab, cfg.seed);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  TrainResult result = train(model, lx.train, lx.val, tc);

  Checkpoint ck{cfg.model, tc, lx.vocab, model.params(), result.best_epoch,
                result.best_val_acc};
  write_file(out_dir / "config_echo.json", experiment_to_json(cfg).dump(2) + "\n");
  save_checkpoint((out_dir / "checkpoint.json").string(), ck);
  write_file(out_dir / "train_log.csv", train_log_csv(result.log));

  std::cout << "trained " << encoder_kind_name(cfg.model.encoder.kind) << "/"
            << scheme_name(cfg.model.scheme) << " on " << task_name(cfg.task) << ": best epoch "
            << result.best_epoch << ", val accuracy " << std::fixed << std::setprecision(4)
            << result.best_val_acc << "\n";
  std::cout << "checkpoint: " << (out_dir / "checkpoint.json").string() << "\n";
  return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& checkpoint_path,
             const std::string& split_name) {
  ExperimentConfig cfg = load_config(opts);
  Checkpoint ck = load_checkpoint(checkpoint_path);
  Model model = model_from_checkpoint(ck);

  Dataset data = load_dataset(cfg.data_dir, cfg.task);
  PreparedSplit split = prepare_split(data.split(split_name), model.vocab(), model.config());
  EvalOutcome outcome = evaluate_split(model, split);

  std::ostringstream csv;
  csv << "model,dataset,split,class,mean,ci95,n\n" << std::fixed << std::setprecision(6);
  for (const auto& [cls, acc] : outcome.by_class)
    csv << encoder_kind_name(model.config().encoder.kind) << ',' << task_name(cfg.task) << ','
        << split_name << ',' << cls << ',' << acc << ",,1\n";
  std::cout << csv.str();
  if (!cfg.out_dir.empty()) write_file(fs::path(cfg.out_dir) / "eval_report.csv", csv.str());
  return 0;
}

int cmd_benchmark(const CommonOpts& opts) {
  ExperimentConfig cfg = load_config(opts);
  fs::path out_dir(cfg.out_dir);

  MultiRunResult result = multi_run(cfg, cfg.runs, opts.jobs);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";

  std::string csv = results_csv(encoder_kind_name(cfg.model.encoder.kind), task_name(cfg.task),
                                "test", result);
  std::ostringstream runs;
  runs << "run,seed,class,accuracy\n" << std::fixed << std::setprecision(6);
  for (size_t r = 0; r < result.per_run.size(); ++r)
    for (const auto& [cls, acc] : result.per_run[r])
      runs << r << ',' << result.run_seeds[r] << ',' << cls << ',' << acc << "\n";

  write_file(out_dir / "config_echo.json", experiment_to_json(cfg).dump(2) + "\n");
  write_file(out_dir / "results.csv", csv);
  write_file(out_dir / "runs.csv", runs.str());
  std::cout << csv;

  for (const auto& [cls, stats] : result.by_class)
    std::cout << cls << ": " << std::fixed << std::setprecision(3) << stats.mean << " +- "
              << stats.half_width << " (n=" << stats.accuracies.size() << ")\n";
  return 0;
}

int cmd_gradcheck(uint64_t seed) {
  const double eps = 1e-5, tol = 1e-4;
  auto reports = grad_check_catalogue(seed, eps, 10);
  for (auto& r : grad_check_encoders(seed, eps, 10)) reports.push_back(std::move(r));

  bool ok = true;
  std::printf("%-24s %-12s %s\n", "op", "max-rel-err", "status");
  for (const auto& r : reports) {
    bool pass = r.max_rel_error <= tol;
    ok = ok && pass;
    std::printf("%-24s %-12.3e %s\n", r.op.c_str(), r.max_rel_error, pass ? "pass" : "FAIL");
  }
  std::printf("%s (tolerance %.0e, eps %.0e, 10 points per op)\n", ok ? "all passed" : "FAILURES",
              tol, eps);
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evidentia - hypothesis evaluation experiments"};
  app.require_subcommand(1);

  CommonOpts opts;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* c = cmd->add_option("--config", opts.config_path, "experiment config JSON");
    if (needs_config) c->required();
    cmd->add_option("--jobs", opts.jobs, "parallel workers (benchmark)");
    cmd->add_option("--seed", opts.seed, "master seed override")
        ->each([&](const std::string&) { opts.seed_set = true; });
    cmd->add_option("--out", opts.out_dir, "output directory override");
  };

  auto* train_cmd = app.add_subcommand("train", "train one model, write checkpoint + log");
  add_common(train_cmd, true);

  std::string checkpoint_path, split_name = "test";
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
  add_common(eval_cmd, true);
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint JSON")->required();
  eval_cmd->add_option("--split", split_name, "train|val|test");

  auto* bench_cmd = app.add_subcommand("benchmark", "n independent runs with 95% CIs");
  add_common(bench_cmd, true);

  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of every op");
  grad_cmd->add_option("--seed", opts.seed, "random point seed")
      ->each([&](const std::string&) { opts.seed_set = true; });

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return cmd_train(opts);
    if (eval_cmd->parsed()) return cmd_eval(opts, checkpoint_path, split_name);
    if (bench_cmd->parsed()) return cmd_benchmark(opts);
    if (grad_cmd->parsed()) return cmd_gradcheck(opts.seed_set ? opts.seed : 7);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
