#pragma once

#include <map>
#include <string>
#include <vector>

#include "evidentia/model.hpp"

namespace evidentia {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double l2 = 1e-4;            // applied to weight matrices only, never biases
  double dropout = 1.0 / 3.0;  // sentence-embedding dropout
  int batch_size = 32;         // hypothesis instances per step
  int epochs = 16;
  int patience = 4;  // stop after this many non-improving validation epochs
  uint64_t seed = 1;
  Precision precision = Precision::f64;

  void validate() const;
};

// -label*ln(y) - (1-label)*ln(1-y), y clamped to [1e-7, 1-1e-7].
double bce_loss(double y, int label);

struct AdamState {
  std::map<std::string, Array> m, v;
  long step = 0;
};

// Bias-corrected Adam; L2 enters as gradient += l2 * param on decaying
// entries. Rejects gradients whose shape does not match the parameter.
void adam_step(ParameterStore& params, const GradientMap& grads, AdamState& state,
               const TrainConfig& cfg);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

struct TrainResult {
  int best_epoch = -1;
  double best_val_acc = 0.0;
  std::vector<EpochLog> log;
};

// End-to-end training from hypothesis labels only. On return the model
// holds the parameters of the best-validation epoch (ties keep the
// earlier epoch). Divergence (non-finite loss) aborts with a diagnostic.
TrainResult train(Model& model, const PreparedSplit& train_set, const PreparedSplit& val_set,
                  const TrainConfig& cfg);

struct Checkpoint {
  ModelConfig model_config;
  TrainConfig train_config;
  Vocabulary vocab;
  ParameterStore params;
  int best_epoch = -1;
  double best_val_acc = 0.0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);
Model model_from_checkpoint(const Checkpoint& ck);

// Warm start: imports the encoder parameters (emb.adapt, enc.*) from the
// checkpoint, re-initializes the scorer heads, then trains. Shape
// incompatibilities are rejected listing every mismatched parameter name.
TrainResult finetune(Model& model, const Checkpoint& source, const PreparedSplit& train_set,
                     const PreparedSplit& val_set, const TrainConfig& cfg);

}  // namespace evidentia
