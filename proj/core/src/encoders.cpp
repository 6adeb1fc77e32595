#include "evidentia/encoders.hpp"

#include <algorithm>

namespace evidentia {

EncoderKind encoder_kind_from_string(const std::string& s) {
  if (s == "avg") return EncoderKind::avg;
  if (s == "dan") return EncoderKind::dan;
  if (s == "cnn") return EncoderKind::cnn;
  if (s == "rnn") return EncoderKind::rnn;
  if (s == "rnn-cnn") return EncoderKind::rnn_cnn;
  if (s == "attn1511") return EncoderKind::attn1511;
  throw ValidationError("unknown encoder kind: '" + s +
                        "' (expected avg|dan|cnn|rnn|rnn-cnn|attn1511)");
}

const char* encoder_kind_name(EncoderKind k) {
  switch (k) {
    case EncoderKind::avg: return "avg";
    case EncoderKind::dan: return "dan";
    case EncoderKind::cnn: return "cnn";
    case EncoderKind::rnn: return "rnn";
    case EncoderKind::rnn_cnn: return "rnn-cnn";
    case EncoderKind::attn1511: return "attn1511";
  }
  return "?";
}

FocusKind focus_kind_from_string(const std::string& s) {
  if (s == "softmax") return FocusKind::softmax;
  if (s == "sigma-max") return FocusKind::sigma_max;
  throw ValidationError("unknown focus mechanism: '" + s + "' (expected softmax|sigma-max)");
}

const char* focus_kind_name(FocusKind k) {
  return k == FocusKind::softmax ? "softmax" : "sigma-max";
}

int EncoderConfig::output_width() const {
  if (uses_cnn()) return static_cast<int>(cnn_widths.size()) * cnn_filters;
  return hidden;
}

int EncoderConfig::max_cnn_width() const {
  int m = 1;
  for (int w : cnn_widths) m = std::max(m, w);
  return m;
}

void EncoderConfig::validate() const {
  if (hidden < 1) throw ValidationError("encoder: hidden width must be positive");
  if (uses_cnn()) {
    if (cnn_widths.empty()) throw ValidationError("encoder: cnn_widths must be nonempty");
    for (int w : cnn_widths)
      if (w < 1) throw ValidationError("encoder: cnn widths must be positive");
    if (cnn_filters < 1) throw ValidationError("encoder: cnn_filters must be positive");
  }
  if (kind == EncoderKind::dan) {
    if (dan_depth < 0) throw ValidationError("encoder: dan_depth must be >= 0");
    if (!(word_dropout >= 0.0 && word_dropout < 1.0))
      throw ValidationError("encoder: word_dropout must lie in [0,1)");
  }
}

namespace {

struct GruNodes {
  int Wr, Ur, br, Wz, Uz, bz, Wh, Uh, bh;
};

GruNodes declare_gru(Graph& g, const std::string& prefix, int in, int h) {
  return {g.param(prefix + ".Wr", in, h), g.param(prefix + ".Ur", h, h),
          g.param(prefix + ".br", 1, h),  g.param(prefix + ".Wz", in, h),
          g.param(prefix + ".Uz", h, h),  g.param(prefix + ".bz", 1, h),
          g.param(prefix + ".Wh", in, h), g.param(prefix + ".Uh", h, h),
          g.param(prefix + ".bh", 1, h)};
}

int gru_step_nodes(Graph& g, const GruNodes& p, int x_t, int h_prev) {
  int r = g.sigmoid(g.add(g.add(g.matmul(x_t, p.Wr), g.matmul(h_prev, p.Ur)), p.br));
  int z = g.sigmoid(g.add(g.add(g.matmul(x_t, p.Wz), g.matmul(h_prev, p.Uz)), p.bz));
  int hc = g.tanh(g.add(g.add(g.matmul(x_t, p.Wh), g.matmul(g.mul(r, h_prev), p.Uh)), p.bh));
  int ones = g.constant(Array::full(1, g.node(h_prev).cols, 1.0));
  return g.add(g.mul(g.sub(ones, z), h_prev), g.mul(z, hc));
}

// Unrolled masked recurrence: padded steps carry the previous state through.
struct BiGruOut {
  std::vector<int> states;  // per-token fw+bw sum, each [1,h]
  int final_sum = -1;       // fw final + bw final
};

BiGruOut build_bigru(Graph& g, const EncoderConfig& cfg, const SentenceNodes& s, int in_w) {
  const int T = g.node(s.feats).rows;
  const int h = cfg.hidden;
  GruNodes fw = declare_gru(g, "enc.gru.fw", in_w, h);
  GruNodes bw = declare_gru(g, "enc.gru.bw", in_w, h);
  int one = g.constant(Array::scalar(1.0));

  auto run = [&](const GruNodes& p, bool reverse) {
    std::vector<int> states(T);
    int state = g.constant(Array::zeros(1, h));
    for (int i = 0; i < T; ++i) {
      int t = reverse ? T - 1 - i : i;
      int x_t = g.slice_rows(s.feats, t, 1);
      int m_t = g.slice_rows(s.mask, t, 1);
      int stepped = gru_step_nodes(g, p, x_t, state);
      state = g.add(g.scale_rows(stepped, m_t), g.scale_rows(state, g.sub(one, m_t)));
      states[t] = state;
    }
    return states;
  };

  std::vector<int> fw_states = run(fw, false);
  std::vector<int> bw_states = run(bw, true);

  BiGruOut out;
  out.states.resize(T);
  for (int t = 0; t < T; ++t) out.states[t] = g.add(fw_states[t], bw_states[t]);
  out.final_sum = g.add(fw_states[T - 1], bw_states[0]);
  return out;
}

int stack_rows(Graph& g, const std::vector<int>& rows) {
  int acc = rows[0];
  for (size_t i = 1; i < rows.size(); ++i) acc = g.concat_rows(acc, rows[i]);
  return acc;
}

int build_cnn(Graph& g, const EncoderConfig& cfg, int seq, const SentenceNodes& s, int in_w) {
  int out = -1;
  for (int w : cfg.cnn_widths) {
    int Wf = g.param("enc.cnn.w" + std::to_string(w) + ".W", w * in_w, cfg.cnn_filters);
    int bf = g.param("enc.cnn.w" + std::to_string(w) + ".b", 1, cfg.cnn_filters);
    int windows = g.window_concat(seq, w);
    int conv = g.add(g.matmul(windows, Wf), g.broadcast_rows(bf, g.node(windows).rows));
    int pooled = g.masked_max(g.relu(conv), s.window_mask.at(w));
    out = out < 0 ? pooled : g.concat_cols(out, pooled);
  }
  return out;
}

int build_avg_or_dan(Graph& g, const EncoderConfig& cfg, const SentenceNodes& s, int in_w,
                     bool training) {
  int mask = s.mask;
  if (cfg.kind == EncoderKind::dan && training) {
    if (s.word_drop < 0) throw ValidationError("dan encoder: missing word-dropout mask node");
    mask = s.word_drop;
  }
  int mean = g.masked_mean(s.feats, mask);
  int W = g.param("enc.proj.W", in_w, cfg.hidden);
  int b = g.param("enc.proj.b", 1, cfg.hidden);
  int e = g.add(g.matmul(mean, W), b);
  if (cfg.kind == EncoderKind::dan) {
    for (int i = 1; i <= cfg.dan_depth; ++i) {
      int Wi = g.param("enc.dan" + std::to_string(i) + ".W", cfg.hidden, cfg.hidden);
      int bi = g.param("enc.dan" + std::to_string(i) + ".b", 1, cfg.hidden);
      e = g.relu(g.add(g.matmul(e, Wi), bi));
    }
  }
  return e;
}

}  // namespace

Array gru_step(const Array& x_t, const Array& h_prev, const GruWeights& w) {
  Graph g;
  int x = g.input("x", x_t.rows, x_t.cols);
  int h = g.input("h", h_prev.rows, h_prev.cols);
  GruNodes p = declare_gru(g, "gru", x_t.cols, h_prev.cols);
  int out = gru_step_nodes(g, p, x, h);

  ParameterStore store;
  store.add("gru.Wr", w.Wr, true);
  store.add("gru.Ur", w.Ur, true);
  store.add("gru.br", w.br, false);
  store.add("gru.Wz", w.Wz, true);
  store.add("gru.Uz", w.Uz, true);
  store.add("gru.bz", w.bz, false);
  store.add("gru.Wh", w.Wh, true);
  store.add("gru.Uh", w.Uh, true);
  store.add("gru.bh", w.bh, false);

  Execution ex;
  ex.forward(g, store, {{"x", x_t}, {"h", h_prev}});
  return ex.value(out);
}

Array focus_weights(const Array& scores, FocusKind kind) {
  if (scores.size() == 0) throw ValidationError("focus: empty score vector");
  if (scores.rows != 1 && scores.cols != 1)
    throw ValidationError("focus: scores must be a vector");

  Array col = scores;
  if (col.rows == 1 && col.cols > 1) {
    col.rows = scores.cols;
    col.cols = 1;
  }
  Graph g;
  int a = g.input("a", col.rows, 1);
  int mask = g.constant(Array::full(col.rows, 1, 1.0));
  int s = build_focus(g, kind, a, mask);

  ParameterStore none;
  Execution ex;
  ex.forward(g, none, {{"a", col}});
  Array out = ex.value(s);
  if (scores.rows == 1 && scores.cols > 1) {
    out.rows = 1;
    out.cols = scores.cols;
  }
  return out;
}

int build_focus(Graph& g, FocusKind kind, int scores, int mask) {
  if (kind == FocusKind::softmax)
    return g.transpose(g.softmax(g.transpose(scores), g.transpose(mask)));
  int sg = g.sigmoid(scores);
  return g.div(sg, g.masked_max(sg, mask));
}

int build_encoder(Graph& g, const EncoderConfig& cfg, const SentenceNodes& s, int input_width,
                  bool training) {
  switch (cfg.kind) {
    case EncoderKind::avg:
    case EncoderKind::dan:
      return build_avg_or_dan(g, cfg, s, input_width, training);
    case EncoderKind::cnn:
      return build_cnn(g, cfg, s.feats, s, input_width);
    case EncoderKind::rnn:
      return build_bigru(g, cfg, s, input_width).final_sum;
    case EncoderKind::rnn_cnn:
    case EncoderKind::attn1511: {
      // attn1511 encodes the hypothesis exactly like rnn-cnn
      BiGruOut gru = build_bigru(g, cfg, s, input_width);
      return build_cnn(g, cfg, stack_rows(g, gru.states), s, cfg.hidden);
    }
  }
  throw ValidationError("build_encoder: unhandled encoder kind");
}

int build_encoder_attn(Graph& g, const EncoderConfig& cfg, const SentenceNodes& s,
                       int input_width, int hypothesis_embedding) {
  BiGruOut gru = build_bigru(g, cfg, s, input_width);
  int seq = stack_rows(g, gru.states);
  int M = g.param("enc.attn.M", cfg.output_width(), cfg.hidden);
  int v = g.matmul(hypothesis_embedding, M);        // [1,h]
  int scores = g.matmul(seq, g.transpose(v));       // [T,1]
  int focus = build_focus(g, cfg.focus, scores, s.mask);
  return build_cnn(g, cfg, g.scale_rows(seq, focus), s, cfg.hidden);
}

}  // namespace evidentia
