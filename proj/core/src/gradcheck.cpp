#include "evidentia/gradcheck.hpp"

#include "evidentia/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace evidentia {

namespace {

// A test graph for one op: inputs named x0..xN bound from `point`, the op
// applied, then a fixed random linear functional to reduce to a scalar loss.
struct OpHarness {
  Graph graph;
  Bindings bindings;
  std::vector<std::string> diff;  // bindings to differentiate
  int loss = -1;
};

int reduce_to_scalar(Graph& g, int out, Rng& rng) {
  const Node& nd = g.node(out);
  Array cotangent(nd.rows, nd.cols);
  for (auto& v : cotangent.data) v = rng.uniform(-1.0, 1.0);
  int weighted = g.mul(out, g.constant(std::move(cotangent)));
  int per_col = g.masked_sum(weighted, g.constant(Array::full(nd.rows, 1, 1.0)));
  return g.matmul(per_col, g.constant(Array::full(nd.cols, 1, 1.0)));
}

const Array& arg(const std::vector<Array>& point, size_t i, const std::string& op) {
  if (i >= point.size())
    throw ValidationError("grad_check(" + op + "): expected at least " + std::to_string(i + 1) +
                          " point arrays");
  return point[i];
}

using Builder = std::function<void(OpHarness&, const std::vector<Array>&, Rng&)>;

// Expected point arrays per op kind:
//   matmul               [A(m,k), B(k,n)]            both differentiated
//   add|sub|mul|div      [A, B] same shape           both (div: keep B away from 0)
//   sigmoid|tanh|relu    [X]                         (relu: keep X away from 0)
//   transpose            [X]
//   softmax              [X(r,c), mask(r,c)]         X only
//   masked_max|mean|sum  [X(T,d), mask(T,1)]         X only (max: no near-ties)
//   concat_cols|rows     [A, B]                      both
//   dropout              [X, mask]                   X only
//   broadcast_rows       [V(1,d)]                    broadcast to 4 rows
//   scale_rows           [X(T,d), S(T,1)]            both
//   slice_rows           [X(T>=3,d)]                 rows [1,3)
//   window_concat        [X(T>=2,d)]                 width 2
//   embed_rows           [table(K,d), idx(T,1)]      table only
//   bce                  [y(1,1), label(1,1)]        both (y in (clamp bounds))
const std::vector<std::pair<std::string, Builder>>& builders() {
  static const std::vector<std::pair<std::string, Builder>> table = {
      {"matmul",
       [](OpHarness& h, const std::vector<Array>& p, Rng& rng) {
         int a = h.graph.input("x0", arg(p, 0, "matmul").rows, p[0].cols);
         int b = h.graph.input("x1", arg(p, 1, "matmul").rows, p[1].cols);
         h.diff = {"x0", "x1"};
         h.loss = reduce_to_scalar(h.graph, h.graph.matmul(a, b), rng);
       }},
      {"add",
       [](OpHarness& h, const std::vector<Array>& p, Rng& rng) {
         int a = h.graph.input("x0", arg(p, 0, "add").rows, p[0].cols);
         int b = h.graph.input("x1", arg(p, 1, "add").rows, p[1].cols);
         h.diff = {"x0", "x1"};
         h.loss = reduce_to_scalar(h.graph, h.graph.add(a, b), rng);
       }},
      {"sub",
       [](OpHarness& h, const std::vector<Array>& p, Rng& rng) {
         int a = h.graph.input("x0", arg(p, 0, "sub").rows, p[0].cols);
         int b = h.graph.input("x1", arg(p, 1, "sub").rows, p[1].cols);
         h.diff = {"x0", "x1"};
         h.loss = reduce_to_scalar(h.graph, h.graph.sub(a, b), rng);
       }},
      {"mul",
       [](OpHarness& h, const std::vector<Array>& p, Rng& rng) {
         int a = h.graph.input("x0", arg(p, 0, "mul").rows, p[0].cols);
         int b = h.graph.input("x1", arg(p, 1, "mul").rows, p[1].cols);
         h.diff = {"x0", "x1"};
         h.loss = reduce_to_scalar(h.graph, h.graph.mul(a, b), rng);
       }},
      {"div",
       [](OpHarness& h, const std::vector<Array>& p, Rng& rng) {
         int a = h.graph.input("x0", arg(p, 0, "div").rows, p[0].cols);
         int b = h.graph.input("x1", arg(p, 1, "div").rows, p[1].cols);
         h.diff = {"x0", "x1"};
         h.loss = reduce_to_scalar(h.graph, h.graph.div(a, b), rng);
       }},
      {"sigmoid",
       [](OpHarness& h, const std::vector<Array>& p, Rng& rng) {
         int a = h.graph.input("x0", arg(p, 0, "sigmoid").rows, p[0].cols);
         h.diff = {"x0"};
         h.loss = reduce_to_scalar(h.graph, h.graph.sigmoid(a), rng);
       }},
      {"tanh",
       [](OpHarness& h, const std::vector<Array>& p, Rng& rng) {
         int a = h.graph.input("x0", arg(p, 0, "tanh").rows, p[0].cols);
         h.diff = {"x0"};
         h.loss = reduce_to_scalar(h.graph, h.graph.tanh(a), rng);
       }},
      {"relu",
       [](OpHarness& h, const std::vector<Array>& p, Rng& rng) {
         int a = h.graph.input("x0", arg(p, 0, "relu").rows, p[0].cols);
         h.diff = {"x0"};
         h.loss = reduce_to_scalar(h.graph, h.graph.relu(a), rng);
       }},
      {"softmax",
       [](OpHarness& h, const std::vector<Array>& p, Rng& rng) {
         int a = h.graph.input("x0", arg(p, 0, "softmax").rows, p[0].cols);
         int m = h.graph.constant(arg(p, 1, "softmax"));
         h.diff = {"x0"};
         h.loss = reduce_to_scalar(h.graph, h.graph.softmax(a, m), rng);
       }},
      {"masked_max",
       [](OpHarness& h, const std::vector<Array>& p, Rng& rng) {
         int a = h.graph.input("x0", arg(p, 0, "masked_max").rows, p[0].cols);
         int m = h.graph.constant(arg(p, 1, "masked_max"));
         h.diff = {"x0"};
         h.loss = reduce_to_scalar(h.graph, h.graph.masked_max(a, m), rng);
       }},
      {"masked_mean",
       [](OpHarness& h, const std::vector<Array>& p, Rng& rng) {
         int a = h.graph.input("x0", arg(p, 0, "masked_mean").rows, p[0].cols);
         int m = h.graph.constant(arg(p, 1, "masked_mean"));
         h.diff = {"x0"};
         h.loss = reduce_to_scalar(h.graph, h.graph.masked_mean(a, m), rng);
       }},
      {"masked_sum",
       [](OpHarness& h, const std::vector<Array>& p, Rng& rng) {
         int a = h.graph.input("x0", arg(p, 0, "masked_sum").rows, p[0].cols);
         int m = h.graph.constant(arg(p, 1, "masked_sum"));
         h.diff = {"x0"};
         h.loss = reduce_to_scalar(h.graph, h.graph.masked_sum(a, m), rng);
       }},
      {"concat_cols",
       [](OpHarness& h, const std::vector<Array>& p, Rng& rng) {
         int a = h.graph.input("x0", arg(p, 0, "concat_cols").rows, p[0].cols);
         int b = h.graph.input("x1", arg(p, 1, "concat_cols").rows, p[1].cols);
         h.diff = {"x0", "x1"};
         h.loss = reduce_to_scalar(h.graph, h.graph.concat_cols(a, b), rng);
       }},
      {"concat_rows",
       [](OpHarness& h, const std::vector<Array>& p, Rng& rng) {
         int a = h.graph.input("x0", arg(p, 0, "concat_rows").rows, p[0].cols);
         int b = h.graph.input("x1", arg(p, 1, "concat_rows").rows, p[1].cols);
         h.diff = {"x0", "x1"};
         h.loss = reduce_to_scalar(h.graph, h.graph.concat_rows(a, b), rng);
       }},
      {"dropout",
       [](OpHarness& h, const std::vector<Array>& p, Rng& rng) {
         int a = h.graph.input("x0", arg(p, 0, "dropout").rows, p[0].cols);
         int m = h.graph.constant(arg(p, 1, "dropout"));
         h.diff = {"x0"};
         h.loss = reduce_to_scalar(h.graph, h.graph.dropout(a, m), rng);
       }},
      {"broadcast_rows",
       [](OpHarness& h, const std::vector<Array>& p, Rng& rng) {
         int a = h.graph.input("x0", 1, arg(p, 0, "broadcast_rows").cols);
         h.diff = {"x0"};
         h.loss = reduce_to_scalar(h.graph, h.graph.broadcast_rows(a, 4), rng);
       }},
      {"scale_rows",
       [](OpHarness& h, const std::vector<Array>& p, Rng& rng) {
         int a = h.graph.input("x0", arg(p, 0, "scale_rows").rows, p[0].cols);
         int s = h.graph.input("x1", arg(p, 1, "scale_rows").rows, 1);
         h.diff = {"x0", "x1"};
         h.loss = reduce_to_scalar(h.graph, h.graph.scale_rows(a, s), rng);
       }},
      {"slice_rows",
       [](OpHarness& h, const std::vector<Array>& p, Rng& rng) {
         int a = h.graph.input("x0", arg(p, 0, "slice_rows").rows, p[0].cols);
         h.diff = {"x0"};
         h.loss = reduce_to_scalar(h.graph, h.graph.slice_rows(a, 1, 2), rng);
       }},
      {"window_concat",
       [](OpHarness& h, const std::vector<Array>& p, Rng& rng) {
         int a = h.graph.input("x0", arg(p, 0, "window_concat").rows, p[0].cols);
         h.diff = {"x0"};
         h.loss = reduce_to_scalar(h.graph, h.graph.window_concat(a, 2), rng);
       }},
      {"embed_rows",
       [](OpHarness& h, const std::vector<Array>& p, Rng& rng) {
         int t = h.graph.input("x0", arg(p, 0, "embed_rows").rows, p[0].cols);
         int i = h.graph.constant(arg(p, 1, "embed_rows"));
         h.diff = {"x0"};
         h.loss = reduce_to_scalar(h.graph, h.graph.embed_rows(t, i), rng);
       }},
      {"transpose",
       [](OpHarness& h, const std::vector<Array>& p, Rng& rng) {
         int a = h.graph.input("x0", arg(p, 0, "transpose").rows, p[0].cols);
         h.diff = {"x0"};
         h.loss = reduce_to_scalar(h.graph, h.graph.transpose(a), rng);
       }},
      {"bce",
       [](OpHarness& h, const std::vector<Array>& p, Rng& rng) {
         int y = h.graph.input("x0", 1, 1);
         int l = h.graph.input("x1", 1, 1);
         (void)arg(p, 1, "bce");
         h.diff = {"x0", "x1"};
         h.loss = reduce_to_scalar(h.graph, h.graph.bce(y, l), rng);
       }},
  };
  return table;
}

double eval_loss(const OpHarness& h, const ParameterStore& none) {
  Execution ex;
  ex.forward(h.graph, none, h.bindings);
  return ex.value(h.loss).data[0];
}

}  // namespace

const std::vector<std::string>& grad_check_op_kinds() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, fn] : builders()) n.push_back(name);
    return n;
  }();
  return names;
}

double grad_check(const std::string& op_kind, const std::vector<Array>& point, double epsilon) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3))
    throw ValidationError("grad_check: epsilon must lie in [1e-7, 1e-3]");
  const Builder* builder = nullptr;
  for (const auto& [name, fn] : builders())
    if (name == op_kind) builder = &fn;
  if (!builder) throw ValidationError("grad_check: unknown op kind '" + op_kind + "'");

  // Fixed seed: the cotangent is part of the check, not a source of flakiness.
  Rng rng(0x5eedULL);
  OpHarness h;
  (*builder)(h, point, rng);
  for (size_t i = 0; i < point.size(); ++i) {
    std::string name = "x" + std::to_string(i);
    if (h.graph.inputs().count(name)) h.bindings[name] = point[i];
  }

  ParameterStore none;
  Execution ex;
  ex.forward(h.graph, none, h.bindings);
  ex.backward(h.graph, h.loss);

  double max_rel = 0.0;
  for (const std::string& name : h.diff) {
    int id = h.graph.inputs().at(name);
    const Array& analytic = ex.gradient(id);
    Array& x = h.bindings[name];
    for (size_t k = 0; k < x.size(); ++k) {
      const double orig = x.data[k];
      x.data[k] = orig + epsilon;
      double lp = eval_loss(h, none);
      x.data[k] = orig - epsilon;
      double lm = eval_loss(h, none);
      x.data[k] = orig;
      double numeric = (lp - lm) / (2.0 * epsilon);
      double a = analytic.rows > 0 ? analytic.data[k] : 0.0;
      double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

namespace {

Array away_from_zero(Rng& rng, int r, int c, double lo, double hi) {
  Array a(r, c);
  for (auto& v : a.data) v = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(lo, hi);
  return a;
}

Array binary_mask(Rng& rng, int r, bool ensure_one = true) {
  Array m(r, 1);
  int ones = 0;
  for (auto& v : m.data) {
    v = rng.bernoulli(0.7) ? 1.0 : 0.0;
    ones += v != 0.0;
  }
  if (ensure_one && ones == 0) m.data[rng.index(r)] = 1.0;
  return m;
}

// Random point generators per op; shapes are small but non-square on purpose.
std::vector<Array> random_point(const std::string& op, Rng& rng) {
  if (op == "matmul") return {rng.uniform_array(2, 3, -1, 1), rng.uniform_array(3, 2, -1, 1)};
  if (op == "add" || op == "sub" || op == "mul")
    return {rng.uniform_array(3, 4, -1, 1), rng.uniform_array(3, 4, -1, 1)};
  if (op == "div") return {rng.uniform_array(3, 4, -1, 1), away_from_zero(rng, 3, 4, 0.5, 1.5)};
  if (op == "sigmoid" || op == "tanh" || op == "transpose")
    return {rng.uniform_array(3, 4, -2, 2)};
  if (op == "relu") return {away_from_zero(rng, 3, 4, 0.1, 1.0)};
  if (op == "softmax") {
    Array m(2, 5);
    for (int r = 0; r < 2; ++r) {
      Array row = binary_mask(rng, 5);
      for (int c = 0; c < 5; ++c) m.at(r, c) = row.data[c];
    }
    return {rng.uniform_array(2, 5, -2, 2), m};
  }
  if (op == "masked_max") {
    // keep per-column values well separated so the argmax is stable under eps
    Array x(5, 3);
    for (int c = 0; c < 3; ++c) {
      std::vector<double> vals = {0.0, 0.2, 0.4, 0.6, 0.8};
      std::shuffle(vals.begin(), vals.end(), rng.engine());
      for (int r = 0; r < 5; ++r) x.at(r, c) = vals[r] + rng.uniform(-0.05, 0.05);
    }
    return {x, binary_mask(rng, 5)};
  }
  if (op == "masked_mean" || op == "masked_sum")
    return {rng.uniform_array(5, 3, -1, 1), binary_mask(rng, 5)};
  if (op == "concat_cols") return {rng.uniform_array(3, 2, -1, 1), rng.uniform_array(3, 4, -1, 1)};
  if (op == "concat_rows") return {rng.uniform_array(2, 3, -1, 1), rng.uniform_array(4, 3, -1, 1)};
  if (op == "dropout") {
    Array m(3, 4);
    for (auto& v : m.data) v = rng.bernoulli(2.0 / 3.0) ? 1.5 : 0.0;  // inverted, q = 2/3
    return {rng.uniform_array(3, 4, -1, 1), m};
  }
  if (op == "broadcast_rows") return {rng.uniform_array(1, 4, -1, 1)};
  if (op == "scale_rows") return {rng.uniform_array(4, 3, -1, 1), rng.uniform_array(4, 1, -1, 1)};
  if (op == "slice_rows") return {rng.uniform_array(5, 3, -1, 1)};
  if (op == "window_concat") return {rng.uniform_array(5, 3, -1, 1)};
  if (op == "embed_rows") {
    Array idx(4, 1);
    idx.data = {2.0, -1.0, 0.0, 2.0};  // includes OOV and a repeat
    return {rng.uniform_array(3, 3, -1, 1), idx};
  }
  if (op == "bce")
    return {Array::scalar(rng.uniform(0.2, 0.8)), Array::scalar(rng.bernoulli(0.5) ? 1.0 : 0.0)};
  throw ValidationError("no point generator for op '" + op + "'");
}

}  // namespace

std::vector<GradCheckReport> grad_check_catalogue(uint64_t seed, double epsilon, int points) {
  std::vector<GradCheckReport> out;
  for (const std::string& op : grad_check_op_kinds()) {
    Rng rng(derive_seed(seed, std::hash<std::string>{}(op)));
    GradCheckReport rep{op, 0.0};
    for (int p = 0; p < points; ++p)
      rep.max_rel_error = std::max(rep.max_rel_error, grad_check(op, random_point(op, rng), epsilon));
    out.push_back(std::move(rep));
  }
  return out;
}

std::vector<GradCheckReport> grad_check_encoders(uint64_t seed, double epsilon, int points) {
  EncoderConfig base;
  base.hidden = 3;
  base.cnn_widths = {1, 2};
  base.cnn_filters = 2;
  base.dan_depth = 1;
  const int T = 6, in_w = 7;

  std::vector<GradCheckReport> out;
  for (EncoderKind kind : {EncoderKind::avg, EncoderKind::dan, EncoderKind::cnn, EncoderKind::rnn,
                           EncoderKind::rnn_cnn, EncoderKind::attn1511}) {
    GradCheckReport rep{std::string("encoder:") + encoder_kind_name(kind), 0.0};
    for (int pt = 0; pt < points; ++pt) {
      Rng rng(derive_seed(seed, 1000 + static_cast<uint64_t>(kind) * 64 + pt));
      EncoderConfig cfg = base;
      cfg.kind = kind;
      cfg.focus = pt % 2 == 0 ? FocusKind::sigma_max : FocusKind::softmax;

      Graph g;
      const int len = 2 + static_cast<int>(rng.index(T - 1));  // real length, rest is padding
      auto sentence = [&](const std::string& prefix) {
        SentenceNodes s;
        s.feats = g.input(prefix + ".feats", T, in_w);
        s.mask = g.input(prefix + ".mask", T, 1);
        if (cfg.uses_cnn())
          for (int w : cfg.cnn_widths)
            s.window_mask[w] = g.input(prefix + ".wmask" + std::to_string(w), T - w + 1, 1);
        if (cfg.kind == EncoderKind::dan) s.word_drop = g.input(prefix + ".wdrop", T, 1);
        return s;
      };

      int emb;
      SentenceNodes ev = sentence("x");
      if (kind == EncoderKind::attn1511) {
        SentenceNodes hyp = sentence("h");
        int hyp_emb = build_encoder(g, cfg, hyp, in_w, true);
        emb = build_encoder_attn(g, cfg, ev, in_w, hyp_emb);
      } else {
        emb = build_encoder(g, cfg, ev, in_w, true);
      }
      int loss = reduce_to_scalar(g, emb, rng);

      ParameterStore params;
      for (const auto& [name, id] : g.params()) {
        const Node& nd = g.node(id);
        params.add(name, rng.uniform_array(nd.rows, nd.cols, -0.5, 0.5), true);
      }
      Bindings b;
      std::vector<std::string> diff;
      for (const auto& [name, id] : g.inputs()) {
        const Node& nd = g.node(id);
        if (name.find(".feats") != std::string::npos) {
          b[name] = rng.uniform_array(nd.rows, nd.cols, -0.5, 0.5);
          diff.push_back(name);
        } else if (name.find(".wmask") != std::string::npos) {
          int width = T - nd.rows + 1;
          Array m = Array::zeros(nd.rows, 1);
          int eff = std::max(len, cfg.uses_cnn() ? cfg.max_cnn_width() : 1);
          for (int t = 0; t < nd.rows; ++t)
            if (t + width <= eff) m.data[t] = 1.0;
          b[name] = m;
        } else if (name.find(".wdrop") != std::string::npos || name.find(".mask") != std::string::npos) {
          Array m = Array::zeros(nd.rows, 1);
          for (int t = 0; t < len; ++t) m.data[t] = 1.0;
          b[name] = m;
        }
      }
      rep.max_rel_error =
          std::max(rep.max_rel_error, grad_check_graph(g, loss, params, b, diff, epsilon));
    }
    out.push_back(std::move(rep));
  }
  return out;
}

double grad_check_graph(const Graph& g, int loss_node, const ParameterStore& params,
                        const Bindings& bindings, const std::vector<std::string>& diff_inputs,
                        double epsilon) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3))
    throw ValidationError("grad_check_graph: epsilon must lie in [1e-7, 1e-3]");

  Execution ex;
  ex.forward(g, params, bindings);
  ex.backward(g, loss_node);

  auto loss_at = [&](const ParameterStore& p, const Bindings& b) {
    Execution e;
    e.forward(g, p, b);
    return e.value(loss_node).data[0];
  };

  double max_rel = 0.0;
  auto compare = [&](double analytic, double numeric) {
    double rel =
        std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    max_rel = std::max(max_rel, rel);
  };

  ParameterStore pcopy = params;
  Bindings bcopy = bindings;
  GradientMap pgrads = ex.parameter_gradients(g);
  for (auto& [name, entry] : pcopy.entries()) {
    if (!g.params().count(name)) continue;
    const Array& analytic = pgrads.at(name);
    for (size_t k = 0; k < entry.value.size(); ++k) {
      const double orig = entry.value.data[k];
      entry.value.data[k] = orig + epsilon;
      double lp = loss_at(pcopy, bcopy);
      entry.value.data[k] = orig - epsilon;
      double lm = loss_at(pcopy, bcopy);
      entry.value.data[k] = orig;
      compare(analytic.data[k], (lp - lm) / (2.0 * epsilon));
    }
  }
  for (const std::string& name : diff_inputs) {
    auto it = bcopy.find(name);
    if (it == bcopy.end()) throw ValidationError("grad_check_graph: no binding named " + name);
    int id = g.inputs().at(name);
    const Array& analytic = ex.gradient(id);
    for (size_t k = 0; k < it->second.size(); ++k) {
      const double orig = it->second.data[k];
      it->second.data[k] = orig + epsilon;
      double lp = loss_at(pcopy, bcopy);
      it->second.data[k] = orig - epsilon;
      double lm = loss_at(pcopy, bcopy);
      it->second.data[k] = orig;
      double a = analytic.rows > 0 ? analytic.data[k] : 0.0;
      compare(a, (lp - lm) / (2.0 * epsilon));
    }
  }
  return max_rel;
}

}  // namespace evidentia
