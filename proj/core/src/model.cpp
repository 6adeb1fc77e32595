#include "evidentia/model.hpp"

#include <algorithm>
#include <cmath>

namespace evidentia {

void ModelConfig::validate() const {
  encoder.validate();
  if (embed_dim < 1) throw ValidationError("model: embed_dim must be positive");
  if (adaptable_k < 0) throw ValidationError("model: adaptable_k must be >= 0");
  if (max_tokens < 1) throw ValidationError("model: max_tokens must be positive");
  if (max_evidence < 1) throw ValidationError("model: max_evidence must be positive");
  if (encoder.uses_cnn() && max_tokens < encoder.max_cnn_width())
    throw ValidationError("model: max_tokens must cover the widest CNN filter");
}

TokenizedInstance tokenize_instance(const HypothesisInstance& inst, const Vocabulary& vocab,
                                    const ModelConfig& cfg) {
  TokenizedInstance out;
  out.label = inst.label;
  out.hypothesis = vocab.lookup(tokenize(inst.hypothesis), cfg.max_tokens);
  if (out.hypothesis.tokens.empty())
    throw ValidationError("qid " + inst.qid + ": hypothesis tokenizes to nothing");
  const size_t keep = std::min<size_t>(inst.evidence.size(), cfg.max_evidence);
  for (size_t j = 0; j < keep; ++j) {  // head-first retention
    TokenSequence e = vocab.lookup(tokenize(inst.evidence[j]), cfg.max_tokens);
    if (e.tokens.empty())
      throw ValidationError("qid " + inst.qid + ": evidence tokenizes to nothing");
    out.evidence.push_back(std::move(e));
  }
  return out;
}

double Bm25Context::normalized(const TokenSequence& query, const TokenSequence& doc) const {
  double raw = bm25(query.tokens, doc.tokens, stats, k1, b);
  if (max <= min) return 0.0;
  return std::clamp((raw - min) / (max - min), 0.0, 1.0);
}

Bm25Context build_bm25_context(const std::vector<TokenizedInstance>& instances, double k1,
                               double b) {
  std::vector<std::vector<std::string>> docs;
  for (const auto& inst : instances)
    for (const auto& e : inst.evidence) docs.push_back(e.tokens);
  Bm25Context ctx;
  ctx.k1 = k1;
  ctx.b = b;
  ctx.stats = build_stats(docs);
  bool first = true;
  for (const auto& inst : instances) {
    for (const auto& e : inst.evidence) {
      double s = bm25(inst.hypothesis.tokens, e.tokens, ctx.stats, k1, b);
      if (first || s < ctx.min) ctx.min = s;
      if (first || s > ctx.max) ctx.max = s;
      first = false;
    }
  }
  return ctx;
}

PreparedSplit prepare_split(const Split& split, const Vocabulary& vocab, const ModelConfig& cfg) {
  PreparedSplit out;
  out.instances.reserve(split.instances.size());
  for (const auto& inst : split.instances)
    out.instances.push_back(tokenize_instance(inst, vocab, cfg));
  out.groups = split.groups;
  if (cfg.scheme == IntegrationScheme::mean_bm25 && !out.instances.empty())
    out.bm25 = build_bm25_context(out.instances);
  return out;
}

// ---------------------------------------------------------------------------
// parameters

namespace {

struct ParamSpec {
  std::string name;
  int rows = 0, cols = 0;
  bool decay = true;
  enum Kind { glorot, zero, embedding } init = glorot;
};

std::vector<ParamSpec> param_specs(const ModelConfig& cfg, int adapt_rows) {
  const EncoderConfig& enc = cfg.encoder;
  const int in = cfg.input_width();
  const int h = enc.hidden;
  const int w_out = enc.output_width();

  std::vector<ParamSpec> specs;
  specs.push_back({"emb.adapt", adapt_rows, cfg.embed_dim, true, ParamSpec::embedding});

  if (enc.kind == EncoderKind::avg || enc.kind == EncoderKind::dan) {
    specs.push_back({"enc.proj.W", in, h, true, ParamSpec::glorot});
    specs.push_back({"enc.proj.b", 1, h, false, ParamSpec::zero});
  }
  if (enc.kind == EncoderKind::dan) {
    for (int i = 1; i <= enc.dan_depth; ++i) {
      specs.push_back({"enc.dan" + std::to_string(i) + ".W", h, h, true, ParamSpec::glorot});
      specs.push_back({"enc.dan" + std::to_string(i) + ".b", 1, h, false, ParamSpec::zero});
    }
  }
  if (enc.uses_gru()) {
    for (const char* dir : {"fw", "bw"}) {
      std::string p = std::string("enc.gru.") + dir;
      for (const char* gate : {"r", "z", "h"}) {
        specs.push_back({p + ".W" + gate, in, h, true, ParamSpec::glorot});
        specs.push_back({p + ".U" + gate, h, h, true, ParamSpec::glorot});
        specs.push_back({p + ".b" + gate, 1, h, false, ParamSpec::zero});
      }
    }
  }
  if (enc.uses_cnn()) {
    const int cnn_in = enc.kind == EncoderKind::cnn ? in : h;
    for (int w : enc.cnn_widths) {
      specs.push_back(
          {"enc.cnn.w" + std::to_string(w) + ".W", w * cnn_in, enc.cnn_filters, true,
           ParamSpec::glorot});
      specs.push_back(
          {"enc.cnn.w" + std::to_string(w) + ".b", 1, enc.cnn_filters, false, ParamSpec::zero});
    }
  }
  if (enc.kind == EncoderKind::attn1511)
    specs.push_back({"enc.attn.M", w_out, h, true, ParamSpec::glorot});

  if (cfg.scheme == IntegrationScheme::weighed) {
    specs.push_back({"score.C.w", 2 * w_out, 1, true, ParamSpec::glorot});
    specs.push_back({"score.C.b", 1, 1, false, ParamSpec::zero});
    specs.push_back({"score.R.w", 2 * w_out, 1, true, ParamSpec::glorot});
    specs.push_back({"score.R.b", 1, 1, false, ParamSpec::zero});
  } else {
    const int extra = cfg.scheme == IntegrationScheme::mean_bm25 ? 1 : 0;
    specs.push_back({"score.S.w", 2 * w_out + extra, 1, true, ParamSpec::glorot});
    specs.push_back({"score.S.b", 1, 1, false, ParamSpec::zero});
  }
  return specs;
}

Array init_array(const ParamSpec& spec, const Vocabulary& vocab, Rng& rng) {
  switch (spec.init) {
    case ParamSpec::zero:
      return Array::zeros(spec.rows, spec.cols);
    case ParamSpec::embedding: {
      Array a = vocab.adaptable_init();
      if (a.rows != spec.rows || a.cols != spec.cols) {
        Array padded = Array::zeros(spec.rows, spec.cols);
        for (int r = 0; r < std::min(a.rows, spec.rows); ++r)
          for (int c = 0; c < std::min(a.cols, spec.cols); ++c) padded.at(r, c) = a.at(r, c);
        return padded;
      }
      return a;
    }
    case ParamSpec::glorot: {
      double limit = std::sqrt(6.0 / (spec.rows + spec.cols));
      return rng.uniform_array(spec.rows, spec.cols, -limit, limit);
    }
  }
  return Array::zeros(spec.rows, spec.cols);
}

}  // namespace

ParameterStore init_params(const ModelConfig& cfg, const Vocabulary& vocab, uint64_t seed) {
  Rng rng(seed);
  ParameterStore store;
  for (const auto& spec : param_specs(cfg, std::max(vocab.adaptable_count(), 1)))
    store.add(spec.name, init_array(spec, vocab, rng), spec.decay);
  return store;
}

// ---------------------------------------------------------------------------
// instance graph

namespace {

struct SentenceInputs {
  SentenceNodes nodes;
  int fixed = -1, aidx = -1, flags = -1;
};

SentenceInputs declare_sentence(Graph& g, const ModelConfig& cfg, const std::string& prefix,
                                int adapt_node, int pad_len, bool training) {
  SentenceInputs s;
  s.fixed = g.input(prefix + ".fixed", pad_len, cfg.embed_dim);
  s.aidx = g.input(prefix + ".aidx", pad_len, 1);
  s.flags = g.input(prefix + ".flags", pad_len, 3);
  s.nodes.mask = g.input(prefix + ".mask", pad_len, 1);
  s.nodes.feats =
      g.concat_cols(g.add(s.fixed, g.embed_rows(adapt_node, s.aidx)), s.flags);
  if (cfg.encoder.uses_cnn())
    for (int w : cfg.encoder.cnn_widths)
      s.nodes.window_mask[w] = g.input(prefix + ".wmask" + std::to_string(w), pad_len - w + 1, 1);
  if (cfg.encoder.kind == EncoderKind::dan && training)
    s.nodes.word_drop = g.input(prefix + ".wdrop", pad_len, 1);
  return s;
}

}  // namespace

Model::InstanceGraph build_instance_graph(const ModelConfig& cfg, int vocab_adapt_rows, int slots,
                                          int pad_len, bool training) {
  Model::InstanceGraph ig;
  ig.slots = slots;
  ig.pad_len = pad_len;
  Graph& g = ig.graph;

  const int in_w = cfg.input_width();
  const int emb_w = cfg.encoder.output_width();
  int adapt = g.param("emb.adapt", vocab_adapt_rows, cfg.embed_dim);

  std::vector<int> c_nodes, r_nodes, s_nodes;
  for (int j = 0; j < slots; ++j) {
    SentenceInputs hyp =
        declare_sentence(g, cfg, "h" + std::to_string(j), adapt, pad_len, training);
    SentenceInputs ev =
        declare_sentence(g, cfg, "e" + std::to_string(j), adapt, pad_len, training);

    int h_emb = build_encoder(g, cfg.encoder, hyp.nodes, in_w, training);
    if (training)
      h_emb = g.dropout(h_emb, g.input("h" + std::to_string(j) + ".edrop", 1, emb_w));

    int e_emb = cfg.encoder.kind == EncoderKind::attn1511
                    ? build_encoder_attn(g, cfg.encoder, ev.nodes, in_w, h_emb)
                    : build_encoder(g, cfg.encoder, ev.nodes, in_w, training);
    if (training)
      e_emb = g.dropout(e_emb, g.input("e" + std::to_string(j) + ".edrop", 1, emb_w));

    int feats = g.concat_cols(g.mul(h_emb, e_emb), g.add(h_emb, e_emb));

    if (cfg.scheme == IntegrationScheme::weighed) {
      c_nodes.push_back(g.sigmoid(
          g.add(g.matmul(feats, g.param("score.C.w", 2 * emb_w, 1)), g.param("score.C.b", 1, 1))));
      r_nodes.push_back(g.sigmoid(
          g.add(g.matmul(feats, g.param("score.R.w", 2 * emb_w, 1)), g.param("score.R.b", 1, 1))));
    } else {
      int f = feats;
      int extra = 0;
      if (cfg.scheme == IntegrationScheme::mean_bm25) {
        f = g.concat_cols(feats, g.input("e" + std::to_string(j) + ".bm25", 1, 1));
        extra = 1;
      }
      s_nodes.push_back(g.sigmoid(g.add(g.matmul(f, g.param("score.S.w", 2 * emb_w + extra, 1)),
                                        g.param("score.S.b", 1, 1))));
    }
  }

  auto stack = [&](const std::vector<int>& parts) {
    int acc = parts[0];
    for (size_t i = 1; i < parts.size(); ++i) acc = g.concat_rows(acc, parts[i]);
    return acc;
  };

  int emask = g.input("emask", slots, 1);
  if (cfg.scheme == IntegrationScheme::weighed) {
    int c = stack(c_nodes);
    int r = stack(r_nodes);
    int num = g.masked_sum(g.mul(c, r), emask);
    int den = g.masked_sum(r, emask);
    int eps = g.constant(Array::scalar(kIntegrationEpsilon));
    int den_guarded = g.add(g.relu(g.sub(den, eps)), eps);
    ig.y = g.div(num, den_guarded);
  } else {
    ig.y = g.masked_mean(stack(s_nodes), emask);
  }
  ig.entail_nodes = std::move(c_nodes);
  ig.relevance_nodes = std::move(r_nodes);
  ig.scalar_nodes = std::move(s_nodes);

  if (training) ig.loss = g.bce(ig.y, g.input("label", 1, 1));
  return ig;
}

// ---------------------------------------------------------------------------
// Model

Model::Model(ModelConfig cfg, Vocabulary vocab, uint64_t init_seed)
    : cfg_(std::move(cfg)), vocab_(std::move(vocab)) {
  cfg_.validate();
  if (vocab_.dim() != cfg_.embed_dim)
    throw ValidationError("model: vocabulary dimension " + std::to_string(vocab_.dim()) +
                          " does not match embed_dim " + std::to_string(cfg_.embed_dim));
  params_ = init_params(cfg_, vocab_, init_seed);
}

int Model::evidence_slots(size_t evidence_count) const {
  int e = static_cast<int>(std::min<size_t>(evidence_count, cfg_.max_evidence));
  e = std::max(e, 1);
  if (e <= 4) return e;
  return std::min((e + 3) / 4 * 4, cfg_.max_evidence);
}

int Model::pad_length(const TokenizedInstance& inst) const {
  int longest = static_cast<int>(inst.hypothesis.tokens.size());
  for (const auto& e : inst.evidence)
    longest = std::max(longest, static_cast<int>(e.tokens.size()));
  if (cfg_.encoder.uses_cnn()) longest = std::max(longest, cfg_.encoder.max_cnn_width());
  longest = std::min(longest, cfg_.max_tokens);
  int bucket = (longest + 7) / 8 * 8;
  return std::min(bucket, cfg_.max_tokens);
}

const Model::InstanceGraph& Model::instance_graph(int slots, int pad_len, bool training) {
  auto key = std::make_tuple(slots, pad_len, training);
  auto it = graphs_.find(key);
  if (it != graphs_.end()) return *it->second;
  if (graphs_.size() >= 96) graphs_.clear();  // crude LRU stand-in; rebuilds are cheap
  auto ig = std::make_unique<InstanceGraph>(build_instance_graph(
      cfg_, std::max(vocab_.adaptable_count(), 1), slots, pad_len, training));
  return *graphs_.emplace(key, std::move(ig)).first->second;
}

namespace {

Featurized pad_slot_sentence(int dim, int pad_len) {
  Featurized f;
  f.length = 1;
  f.fixed = Array::zeros(pad_len, dim);
  f.aidx = Array::full(pad_len, 1, -1.0);
  f.flags = Array::zeros(pad_len, 3);
  f.mask = Array::zeros(pad_len, 1);
  f.mask.data[0] = 1.0;  // keep masked reductions well-defined
  return f;
}

Array window_mask(const Featurized& f, int width, int max_width) {
  const int t_rows = f.mask.rows - width + 1;
  Array m = Array::zeros(t_rows, 1);
  // sentences shorter than the widest filter are treated as zero-padded up
  // to that width, so at least one window is always valid
  const int eff = std::min(std::max(f.length, max_width), f.mask.rows);
  for (int t = 0; t < t_rows; ++t)
    if (t + width <= eff) m.data[t] = 1.0;
  return m;
}

Array embedding_dropout_mask(int w, double p, Rng& rng) {
  Array m = Array::full(1, w, 1.0);
  if (p <= 0.0) return m;
  const double q = 1.0 - p;
  for (auto& v : m.data) v = rng.bernoulli(q) ? 1.0 / q : 0.0;
  return m;
}

Array word_dropout_mask(const Featurized& f, double p, Rng& rng) {
  Array m = f.mask;
  if (p <= 0.0) return m;
  bool any_kept = false;
  for (int t = 0; t < f.length; ++t) {
    if (rng.bernoulli(p))
      m.data[t] = 0.0;
    else
      any_kept = true;
  }
  if (!any_kept) return f.mask;  // all dropped: fall back to the undropped mean
  return m;
}

}  // namespace

Bindings Model::make_bindings(const TokenizedInstance& inst, int slots, int pad_len, bool training,
                              Rng* dropout_rng, const Bm25Context* bm25,
                              double train_dropout) const {
  if (inst.evidence.empty()) throw ValidationError("model: instance has no evidence");
  if (cfg_.scheme == IntegrationScheme::mean_bm25 && !bm25)
    throw ValidationError("model: mean-with-bm25 needs a Bm25Context");
  if (training && !dropout_rng)
    throw ValidationError("model: training bindings need a dropout RNG");

  const int real = static_cast<int>(std::min<size_t>(inst.evidence.size(), slots));
  const int emb_w = cfg_.encoder.output_width();
  Bindings b;

  auto bind_sentence = [&](const std::string& prefix, const Featurized& f) {
    if (cfg_.encoder.uses_cnn())
      for (int w : cfg_.encoder.cnn_widths)
        b[prefix + ".wmask" + std::to_string(w)] =
            window_mask(f, w, cfg_.encoder.max_cnn_width());
    if (cfg_.encoder.kind == EncoderKind::dan && training)
      b[prefix + ".wdrop"] = word_dropout_mask(f, cfg_.encoder.word_dropout, *dropout_rng);
    b[prefix + ".fixed"] = f.fixed;
    b[prefix + ".aidx"] = f.aidx;
    b[prefix + ".flags"] = f.flags;
    b[prefix + ".mask"] = f.mask;
  };

  Array emask = Array::zeros(slots, 1);
  for (int j = 0; j < slots; ++j) {
    std::string hj = "h" + std::to_string(j), ej = "e" + std::to_string(j);
    if (j < real) {
      emask.data[j] = 1.0;
      const TokenSequence& ev = inst.evidence[j];
      bind_sentence(hj, featurize_pair(inst.hypothesis, ev, Role::hypothesis, vocab_, pad_len));
      bind_sentence(ej, featurize_pair(ev, inst.hypothesis, Role::evidence, vocab_, pad_len));
      if (cfg_.scheme == IntegrationScheme::mean_bm25)
        b[ej + ".bm25"] = Array::scalar(bm25->normalized(inst.hypothesis, ev));
    } else {
      Featurized pad = pad_slot_sentence(cfg_.embed_dim, pad_len);
      bind_sentence(hj, pad);
      bind_sentence(ej, pad);
      if (cfg_.scheme == IntegrationScheme::mean_bm25) b[ej + ".bm25"] = Array::scalar(0.0);
    }
    if (training) {
      b[hj + ".edrop"] = embedding_dropout_mask(emb_w, train_dropout, *dropout_rng);
      b[ej + ".edrop"] = embedding_dropout_mask(emb_w, train_dropout, *dropout_rng);
    }
  }
  b["emask"] = std::move(emask);
  if (training) b["label"] = Array::scalar(static_cast<double>(inst.label));
  return b;
}

Model::Prediction Model::predict(const TokenizedInstance& inst, const Bm25Context* bm25) {
  const int slots = evidence_slots(inst.evidence.size());
  const int pad = pad_length(inst);
  const InstanceGraph& ig = instance_graph(slots, pad, false);
  Bindings b = make_bindings(inst, slots, pad, false, nullptr, bm25, 0.0);

  exec_.forward(ig.graph, params_, b, cfg_.precision);

  Prediction out;
  out.y = exec_.value(ig.y).data[0];
  const int real = static_cast<int>(std::min<size_t>(inst.evidence.size(), slots));
  for (int j = 0; j < real; ++j) {
    if (cfg_.scheme == IntegrationScheme::weighed) {
      out.pairs.push_back({exec_.value(ig.entail_nodes[j]).data[0],
                           exec_.value(ig.relevance_nodes[j]).data[0]});
    } else {
      out.scalars.push_back(exec_.value(ig.scalar_nodes[j]).data[0]);
      if (cfg_.scheme == IntegrationScheme::mean_bm25)
        out.bm25.push_back(b.at("e" + std::to_string(j) + ".bm25").data[0]);
    }
  }
  return out;
}

void Model::reinit_scorers(uint64_t seed) {
  Rng rng(derive_seed(seed, 0x5c07eULL));
  for (const auto& spec : param_specs(cfg_, std::max(vocab_.adaptable_count(), 1))) {
    if (spec.name.rfind("score.", 0) != 0) continue;
    params_.mutable_value(spec.name) = init_array(spec, vocab_, rng);
  }
}

}  // namespace evidentia
