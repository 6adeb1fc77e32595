#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "helpers.hpp"

namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

CmdResult run_cli(const std::string& args) {
  std::string out_path = "/tmp/evidentia_cli_out.txt";
  std::string cmd = std::string(EVIDENTIA_BIN) + " " + args + " > " + out_path + " 2>&1";
  int status = std::system(cmd.c_str());
  CmdResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out_path);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string write_config(const std::string& name, const std::string& json) {
  std::string path = "/tmp/" + name;
  std::ofstream out(path);
  out << json;
  return path;
}

std::string toy_config_json(const std::string& out_dir) {
  return std::string(R"({
  "task": "argus",
  "data_dir": ")") + testutil::data_dir() + R"(/synthetic_argus",
  "encoder": {"kind": "avg", "hidden": 8},
  "scheme": "weighed",
  "embed_dim": 4,
  "adaptable_k": 16,
  "max_tokens": 16,
  "max_evidence": 8,
  "train": {"epochs": 3, "patience": 3, "batch_size": 4, "dropout": 0.0},
  "runs": 2,
  "seed": 11,
  "out_dir": ")" + out_dir + R"("
})";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("missing dataset path fails naming the key") {
  std::string cfg = write_config("evidentia_cfg_missing.json", R"({
    "task": "argus",
    "data_dir": "/nonexistent/nowhere",
    "train": {"epochs": 1}
  })");
  CmdResult r = run_cli("train --config " + cfg);
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("data_dir") != std::string::npos);
}

TEST_CASE("validation lists every problem at once") {
  std::string cfg = write_config("evidentia_cfg_multi.json", R"({
    "task": "argus",
    "data_dir": "/nonexistent/nowhere",
    "scheme": "voting",
    "train": {"epochs": -3},
    "runs": 0
  })");
  CmdResult r = run_cli("train --config " + cfg);
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("data_dir") != std::string::npos);
  CHECK(r.output.find("voting") != std::string::npos);
  CHECK(r.output.find("epochs") != std::string::npos);
  CHECK(r.output.find("runs") != std::string::npos);
}

TEST_CASE("train writes a checkpoint that reloads, idempotently") {
  std::string out_dir = "/tmp/evidentia_cli_train";
  fs::remove_all(out_dir);
  std::string cfg = write_config("evidentia_cfg_toy.json", toy_config_json(out_dir));

  CmdResult r1 = run_cli("train --config " + cfg);
  INFO(r1.output);
  REQUIRE(r1.exit_code == 0);
  REQUIRE(fs::exists(fs::path(out_dir) / "checkpoint.json"));
  REQUIRE(fs::exists(fs::path(out_dir) / "train_log.csv"));
  std::string first_ck = slurp(fs::path(out_dir) / "checkpoint.json");
  std::string first_log = slurp(fs::path(out_dir) / "train_log.csv");

  // identical config+seed: identical bytes
  CmdResult r2 = run_cli("train --config " + cfg);
  REQUIRE(r2.exit_code == 0);
  CHECK(slurp(fs::path(out_dir) / "checkpoint.json") == first_ck);
  CHECK(slurp(fs::path(out_dir) / "train_log.csv") == first_log);

  // different seed: different training
  CmdResult r3 = run_cli("train --config " + cfg + " --seed 999 --out /tmp/evidentia_cli_seed999");
  REQUIRE(r3.exit_code == 0);
  CHECK(slurp("/tmp/evidentia_cli_seed999/checkpoint.json") != first_ck);
}

TEST_CASE("eval reproduces the logged best validation accuracy") {
  std::string out_dir = "/tmp/evidentia_cli_eval";
  fs::remove_all(out_dir);
  std::string cfg = write_config("evidentia_cfg_eval.json", toy_config_json(out_dir));
  REQUIRE(run_cli("train --config " + cfg).exit_code == 0);

  // find the best val accuracy in the log (ties to the earlier epoch)
  std::ifstream log(fs::path(out_dir) / "train_log.csv");
  std::string line;
  std::getline(log, line);  // header
  CHECK(line == "epoch,train_loss,train_acc,val_acc");
  double best = -1.0;
  while (std::getline(log, line)) {
    double v = std::stod(line.substr(line.rfind(',') + 1));
    if (v > best) best = v;
  }

  CmdResult r = run_cli("eval --config " + cfg + " --checkpoint " + out_dir +
                        "/checkpoint.json --split val");
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("model,dataset,split,class,mean,ci95,n") != std::string::npos);
  std::ostringstream want;
  want << "avg,argus,val,all," << std::fixed << std::setprecision(6) << best;
  CHECK(r.output.find(want.str()) != std::string::npos);
}

TEST_CASE("eval with a missing checkpoint fails cleanly") {
  std::string cfg = write_config("evidentia_cfg_eval2.json", toy_config_json("/tmp/evidentia_x"));
  CmdResult r = run_cli("eval --config " + cfg + " --checkpoint /nonexistent/ck.json");
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("checkpoint") != std::string::npos);
}

TEST_CASE("benchmark smoke run emits mean and confidence interval") {
  std::string out_dir = "/tmp/evidentia_cli_bench";
  fs::remove_all(out_dir);
  std::string cfg = write_config("evidentia_cfg_bench.json", toy_config_json(out_dir));

  CmdResult r = run_cli("benchmark --config " + cfg + " --jobs 2");
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  CHECK(fs::exists(fs::path(out_dir) / "results.csv"));
  CHECK(fs::exists(fs::path(out_dir) / "runs.csv"));
  std::string results = slurp(fs::path(out_dir) / "results.csv");
  CHECK(results.find("model,dataset,split,class,mean,ci95,n") == 0);
  CHECK(results.find("avg,argus,test,all,") != std::string::npos);
  CHECK(r.output.find("+-") != std::string::npos);

  // master-seed reproducibility: a second invocation writes identical bytes
  CmdResult r2 = run_cli("benchmark --config " + cfg + " --jobs 1");
  REQUIRE(r2.exit_code == 0);
  CHECK(slurp(fs::path(out_dir) / "results.csv") == results);
}

TEST_CASE("gradcheck lists every op exactly once and exits zero") {
  CmdResult r = run_cli("gradcheck");
  INFO(r.output);
  CHECK(r.exit_code == 0);
  for (const char* op :
       {"matmul", "add", "sub", "mul", "div", "sigmoid", "tanh", "relu", "softmax", "masked_max",
        "masked_mean", "masked_sum", "concat_cols", "concat_rows", "dropout", "broadcast_rows",
        "scale_rows", "slice_rows", "window_concat", "embed_rows", "transpose", "bce",
        "encoder:avg", "encoder:dan", "encoder:cnn", "encoder:rnn", "encoder:rnn-cnn",
        "encoder:attn1511"}) {
    size_t first = r.output.find(std::string(op) + " ");
    INFO(op);
    CHECK(first != std::string::npos);
    CHECK(r.output.find(std::string(op) + " ", first + 1) == std::string::npos);
  }
}

TEST_CASE("unknown config keys are rejected") {
  std::string cfg = write_config("evidentia_cfg_unknown.json", R"({
    "task": "argus",
    "data_dir": ")" + testutil::data_dir() + R"(/synthetic_argus",
    "learning_rat": 0.1
  })");
  CmdResult r = run_cli("train --config " + cfg);
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("learning_rat") != std::string::npos);
}
