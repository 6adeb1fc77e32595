#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "evidentia/dataio.hpp"
#include "evidentia/model.hpp"

namespace testutil {

inline bool close(double a, double b, double tol = 1e-9) { return std::abs(a - b) <= tol; }

inline std::string data_dir() { return TEST_DATA_DIR; }

// Linearly separable toy task: the label is whether the evidence restates
// the hypothesis tokens (overlap flags carry the signal even with zero
// embeddings).
inline evidentia::Split toy_overlap_split(int n_questions) {
  evidentia::Split split;
  for (int i = 0; i < n_questions; ++i) {
    evidentia::HypothesisInstance inst;
    inst.qid = "toy" + std::to_string(i);
    inst.label = i % 2;
    inst.hypothesis = "did team alpha win the cup";
    if (inst.label == 1) {
      inst.evidence = {"team alpha win the cup last night",
                       "alpha win the cup again"};
    } else {
      inst.evidence = {"rain delayed most flights on monday",
                       "the venue sold roasted chestnuts"};
    }
    split.instances.push_back(std::move(inst));
  }
  return split;
}

inline evidentia::Vocabulary toy_vocab(const evidentia::Split& split, int k, int dim) {
  std::vector<std::vector<std::string>> corpus;
  for (const auto& inst : split.instances) {
    corpus.push_back(evidentia::tokenize(inst.hypothesis));
    for (const auto& e : inst.evidence) corpus.push_back(evidentia::tokenize(e));
  }
  return evidentia::Vocabulary::build(corpus, k, {}, dim);
}

inline evidentia::ModelConfig small_model(evidentia::EncoderKind kind,
                                          evidentia::IntegrationScheme scheme) {
  evidentia::ModelConfig cfg;
  cfg.encoder.kind = kind;
  cfg.encoder.hidden = 8;
  cfg.encoder.cnn_widths = {1, 2};
  cfg.encoder.cnn_filters = 4;
  cfg.encoder.dan_depth = 1;
  cfg.scheme = scheme;
  cfg.embed_dim = 4;
  cfg.adaptable_k = 10;
  cfg.max_tokens = 16;
  cfg.max_evidence = 8;
  return cfg;
}

}  // namespace testutil
