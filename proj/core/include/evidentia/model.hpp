#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "evidentia/dataio.hpp"
#include "evidentia/encoders.hpp"
#include "evidentia/evidence.hpp"
#include "evidentia/graph.hpp"
#include "evidentia/retrieval.hpp"
#include "evidentia/textio.hpp"

namespace evidentia {

struct ModelConfig {
  EncoderConfig encoder;
  IntegrationScheme scheme = IntegrationScheme::weighed;
  int embed_dim = 50;     // d
  int adaptable_k = 100;  // top-K trainable token vectors
  int max_tokens = 60;    // sentence cap L, tail truncation
  int max_evidence = 40;  // per-question cap, head-first retention
  Precision precision = Precision::f64;

  int input_width() const { return embed_dim + 3; }
  void validate() const;
};

// One instance after tokenization, caps applied.
struct TokenizedInstance {
  TokenSequence hypothesis;
  std::vector<TokenSequence> evidence;
  int label = 0;
};
TokenizedInstance tokenize_instance(const HypothesisInstance& inst, const Vocabulary& vocab,
                                    const ModelConfig& cfg);

// Per-split BM25 feature: raw Okapi scores min-max normalized to [0,1]
// over all (hypothesis, evidence) pairs of the split.
struct Bm25Context {
  CorpusStats stats;
  double min = 0.0, max = 1.0;
  double k1 = 1.2, b = 0.75;
  double normalized(const TokenSequence& query, const TokenSequence& doc) const;
};
Bm25Context build_bm25_context(const std::vector<TokenizedInstance>& instances, double k1 = 1.2,
                               double b = 0.75);

// Everything the trainer/evaluator needs from one split.
struct PreparedSplit {
  std::vector<TokenizedInstance> instances;
  std::vector<QuestionGroup> groups;  // instance indices; empty for argus
  std::optional<Bm25Context> bm25;
};
PreparedSplit prepare_split(const Split& split, const Vocabulary& vocab, const ModelConfig& cfg);

// A configured model: vocabulary, parameter store and a cache of instance
// graphs keyed by (evidence slots, padded length, mode).
class Model {
 public:
  struct InstanceGraph {
    Graph graph;
    int y = -1;
    int loss = -1;                      // training graphs only
    std::vector<int> entail_nodes;      // weighed scheme
    std::vector<int> relevance_nodes;   // weighed scheme
    std::vector<int> scalar_nodes;      // mean schemes
    int slots = 0;
    int pad_len = 0;
  };

  struct Prediction {
    double y = 0.0;
    std::vector<PairScore> pairs;    // weighed scheme, one per real evidence
    std::vector<double> scalars;     // mean schemes
    std::vector<double> bm25;        // mean-with-bm25 scheme
  };

  Model(ModelConfig cfg, Vocabulary vocab, uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  int evidence_slots(size_t evidence_count) const;
  int pad_length(const TokenizedInstance& inst) const;

  const InstanceGraph& instance_graph(int slots, int pad_len, bool training);

  // Dropout masks are drawn from `dropout_rng` when training; pass the
  // split's Bm25Context for the mean-with-bm25 scheme.
  Bindings make_bindings(const TokenizedInstance& inst, int slots, int pad_len, bool training,
                         Rng* dropout_rng, const Bm25Context* bm25, double train_dropout) const;

  // Full pipeline for one instance with dropout off.
  Prediction predict(const TokenizedInstance& inst, const Bm25Context* bm25 = nullptr);

  // Re-initialize the scorer heads (used by the finetune path).
  void reinit_scorers(uint64_t seed);

 private:
  ModelConfig cfg_;
  Vocabulary vocab_;
  ParameterStore params_;
  std::map<std::tuple<int, int, bool>, std::unique_ptr<InstanceGraph>> graphs_;
  Execution exec_;  // reused by predict
};

// Fresh parameter store for a config (Glorot-uniform weights, zero biases,
// adaptable embeddings from the vocabulary).
ParameterStore init_params(const ModelConfig& cfg, const Vocabulary& vocab, uint64_t seed);

// Graph construction is exposed for the gradient-check harness.
Model::InstanceGraph build_instance_graph(const ModelConfig& cfg, int vocab_adapt_rows, int slots,
                                          int pad_len, bool training);

}  // namespace evidentia
