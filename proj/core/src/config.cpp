#include "evidentia/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace evidentia {

namespace fs = std::filesystem;

nlohmann::ordered_json model_config_to_json(const ModelConfig& cfg) {
  nlohmann::ordered_json j;
  j["encoder"] = {{"kind", encoder_kind_name(cfg.encoder.kind)},
                  {"hidden", cfg.encoder.hidden},
                  {"cnn_widths", cfg.encoder.cnn_widths},
                  {"cnn_filters", cfg.encoder.cnn_filters},
                  {"dan_depth", cfg.encoder.dan_depth},
                  {"word_dropout", cfg.encoder.word_dropout},
                  {"focus", focus_kind_name(cfg.encoder.focus)}};
  j["scheme"] = scheme_name(cfg.scheme);
  j["embed_dim"] = cfg.embed_dim;
  j["adaptable_k"] = cfg.adaptable_k;
  j["max_tokens"] = cfg.max_tokens;
  j["max_evidence"] = cfg.max_evidence;
  j["precision"] = cfg.precision == Precision::f64 ? "f64" : "f32";
  return j;
}

namespace {

void check_keys(const nlohmann::json& j, const std::set<std::string>& known,
                const std::string& where, std::vector<std::string>* errors) {
  if (!j.is_object()) return;
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) {
      std::string msg = where + ": unknown key '" + it.key() + "'";
      if (errors)
        errors->push_back(msg);
      else
        throw ValidationError(msg);
    }
}

Precision precision_from_string(const std::string& s) {
  if (s == "f64") return Precision::f64;
  if (s == "f32") return Precision::f32;
  throw ValidationError("unknown precision: '" + s + "' (expected f64|f32)");
}

}  // namespace

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  check_keys(j, {"encoder", "scheme", "embed_dim", "adaptable_k", "max_tokens", "max_evidence",
                 "precision"},
             "model", nullptr);
  if (j.contains("encoder")) {
    const auto& e = j.at("encoder");
    check_keys(e, {"kind", "hidden", "cnn_widths", "cnn_filters", "dan_depth", "word_dropout",
                   "focus"},
               "encoder", nullptr);
    if (e.contains("kind")) cfg.encoder.kind = encoder_kind_from_string(e.at("kind"));
    cfg.encoder.hidden = e.value("hidden", cfg.encoder.hidden);
    if (e.contains("cnn_widths"))
      cfg.encoder.cnn_widths = e.at("cnn_widths").get<std::vector<int>>();
    cfg.encoder.cnn_filters = e.value("cnn_filters", cfg.encoder.cnn_filters);
    cfg.encoder.dan_depth = e.value("dan_depth", cfg.encoder.dan_depth);
    cfg.encoder.word_dropout = e.value("word_dropout", cfg.encoder.word_dropout);
    if (e.contains("focus")) cfg.encoder.focus = focus_kind_from_string(e.at("focus"));
  }
  if (j.contains("scheme")) cfg.scheme = scheme_from_string(j.at("scheme"));
  cfg.embed_dim = j.value("embed_dim", cfg.embed_dim);
  cfg.adaptable_k = j.value("adaptable_k", cfg.adaptable_k);
  cfg.max_tokens = j.value("max_tokens", cfg.max_tokens);
  cfg.max_evidence = j.value("max_evidence", cfg.max_evidence);
  if (j.contains("precision")) cfg.precision = precision_from_string(j.at("precision"));
  return cfg;
}

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["learning_rate"] = cfg.learning_rate;
  j["beta1"] = cfg.beta1;
  j["beta2"] = cfg.beta2;
  j["adam_epsilon"] = cfg.adam_epsilon;
  j["l2"] = cfg.l2;
  j["dropout"] = cfg.dropout;
  j["batch_size"] = cfg.batch_size;
  j["epochs"] = cfg.epochs;
  j["patience"] = cfg.patience;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  check_keys(j, {"learning_rate", "beta1", "beta2", "adam_epsilon", "l2", "dropout", "batch_size",
                 "epochs", "patience"},
             "train", nullptr);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.beta1 = j.value("beta1", cfg.beta1);
  cfg.beta2 = j.value("beta2", cfg.beta2);
  cfg.adam_epsilon = j.value("adam_epsilon", cfg.adam_epsilon);
  cfg.l2 = j.value("l2", cfg.l2);
  cfg.dropout = j.value("dropout", cfg.dropout);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.patience = j.value("patience", cfg.patience);
  return cfg;
}

namespace {

// data_dir resolution: explicit path first, then $EVIDENTIA_DATA/<path>,
// then $EVIDENTIA_DATA/<task> when no path was given.
std::string resolve_data_dir(const std::string& given, Task task,
                             std::vector<std::string>* errors) {
  const char* root = std::getenv("EVIDENTIA_DATA");
  if (!given.empty()) {
    if (fs::exists(fs::path(given) / "train.csv")) return given;
    if (root && fs::exists(fs::path(root) / given / "train.csv"))
      return (fs::path(root) / given).string();
    errors->push_back("data_dir: no train.csv under '" + given + "'" +
                      (root ? " (also tried $EVIDENTIA_DATA/" + given + ")" : ""));
    return given;
  }
  if (root) {
    fs::path p = fs::path(root) / task_name(task);
    if (fs::exists(p / "train.csv")) return p.string();
    errors->push_back("data_dir not set and no train.csv under $EVIDENTIA_DATA/" +
                      std::string(task_name(task)));
    return p.string();
  }
  errors->push_back("data_dir not set and EVIDENTIA_DATA is not exported");
  return "";
}

}  // namespace

ExperimentConfig experiment_from_json(const nlohmann::json& j, bool check_files) {
  std::vector<std::string> errors;
  ExperimentConfig cfg;

  check_keys(j,
             {"task", "data_dir", "pretrained_vectors", "encoder", "scheme", "embed_dim",
              "adaptable_k", "max_tokens", "max_evidence", "precision", "train", "runs", "seed",
              "out_dir"},
             "experiment", &errors);

  if (!j.contains("task")) {
    errors.push_back("task: required key missing");
  } else {
    try {
      cfg.task = task_from_string(j.at("task"));
    } catch (const ValidationError& e) {
      errors.push_back(e.what());
    }
  }

  try {
    nlohmann::json model_part;
    for (const char* key :
         {"encoder", "scheme", "embed_dim", "adaptable_k", "max_tokens", "max_evidence",
          "precision"})
      if (j.contains(key)) model_part[key] = j.at(key);
    cfg.model = model_config_from_json(model_part);
    cfg.model.validate();
  } catch (const std::exception& e) {
    errors.push_back(e.what());
  }

  try {
    cfg.train = train_config_from_json(j.value("train", nlohmann::json::object()));
    cfg.train.validate();
  } catch (const std::exception& e) {
    errors.push_back(e.what());
  }

  cfg.runs = j.value("runs", cfg.runs);
  if (cfg.runs < 1) errors.push_back("runs: must be positive");
  cfg.seed = j.value("seed", cfg.seed);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);

  if (check_files) {
    cfg.data_dir = resolve_data_dir(j.value("data_dir", ""), cfg.task, &errors);
    cfg.pretrained_vectors = j.value("pretrained_vectors", "");
    if (!cfg.pretrained_vectors.empty() && !fs::exists(cfg.pretrained_vectors)) {
      const char* root = std::getenv("EVIDENTIA_DATA");
      if (root && fs::exists(fs::path(root) / cfg.pretrained_vectors))
        cfg.pretrained_vectors = (fs::path(root) / cfg.pretrained_vectors).string();
      else
        errors.push_back("pretrained_vectors: file not found: " + cfg.pretrained_vectors);
    }
  } else {
    cfg.data_dir = j.value("data_dir", "");
    cfg.pretrained_vectors = j.value("pretrained_vectors", "");
  }

  if (!errors.empty()) {
    std::ostringstream msg;
    msg << "invalid experiment config (" << errors.size() << " problem"
        << (errors.size() == 1 ? "" : "s") << "):";
    for (const auto& e : errors) msg << "\n  - " << e;
    throw ValidationError(msg.str());
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path, bool check_files) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ValidationError("config " + path + ": invalid JSON: " + e.what());
  }
  return experiment_from_json(j, check_files);
}

nlohmann::ordered_json experiment_to_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["task"] = task_name(cfg.task);
  j["data_dir"] = cfg.data_dir;
  j["pretrained_vectors"] = cfg.pretrained_vectors;
  nlohmann::ordered_json m = model_config_to_json(cfg.model);
  for (auto it = m.begin(); it != m.end(); ++it) j[it.key()] = it.value();
  j["train"] = train_config_to_json(cfg.train);
  j["runs"] = cfg.runs;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  return j;
}

}  // namespace evidentia
