#include "evidentia/graph.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace evidentia {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<EMat>;
using MapC = Eigen::Map<const EMat>;

MapC emap(const Array& a) { return MapC(a.data.data(), a.rows, a.cols); }
MapM emap(Array& a) { return MapM(a.data.data(), a.rows, a.cols); }

std::string node_str(int id, Op op) {
  return "node " + std::to_string(id) + " (" + op_name(op) + ")";
}

constexpr double kBceClamp = 1e-7;

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Param: return "param";
    case Op::Constant: return "const";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Sigmoid: return "sigmoid";
    case Op::TanhOp: return "tanh";
    case Op::Relu: return "relu";
    case Op::Softmax: return "softmax";
    case Op::Dropout: return "dropout";
    case Op::Bce: return "bce";
    case Op::MaskedMax: return "masked_max";
    case Op::MaskedMean: return "masked_mean";
    case Op::MaskedSum: return "masked_sum";
    case Op::MatMul: return "matmul";
    case Op::ConcatCols: return "concat_cols";
    case Op::ConcatRows: return "concat_rows";
    case Op::BroadcastRows: return "broadcast_rows";
    case Op::ScaleRows: return "scale_rows";
    case Op::SliceRows: return "slice_rows";
    case Op::WindowConcat: return "window_concat";
    case Op::EmbedRows: return "embed_rows";
    case Op::Transpose: return "transpose";
  }
  return "?";
}

int Graph::push(Node n) {
  nodes_.push_back(n);
  return static_cast<int>(nodes_.size()) - 1;
}

const Node& Graph::in(int id, const char* ctx) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size()))
    throw ValidationError(std::string(ctx) + ": input node id " + std::to_string(id) +
                          " out of range");
  return nodes_[id];
}

int Graph::input(const std::string& name, int rows, int cols) {
  if (inputs_.count(name) || params_.count(name))
    throw ValidationError("duplicate graph name: " + name);
  Node n;
  n.op = Op::Input;
  n.rows = rows;
  n.cols = cols;
  int id = push(n);
  inputs_[name] = id;
  return id;
}

int Graph::param(const std::string& name, int rows, int cols) {
  auto it = params_.find(name);
  if (it != params_.end()) {
    const Node& old = nodes_[it->second];
    if (old.rows != rows || old.cols != cols)
      throw ValidationError("parameter " + name + " redeclared with a different shape");
    return it->second;  // Siamese reuse
  }
  if (inputs_.count(name)) throw ValidationError("duplicate graph name: " + name);
  Node n;
  n.op = Op::Param;
  n.rows = rows;
  n.cols = cols;
  int id = push(n);
  params_[name] = id;
  return id;
}

int Graph::constant(Array value) {
  Node n;
  n.op = Op::Constant;
  n.rows = value.rows;
  n.cols = value.cols;
  int id = push(n);
  consts_.emplace_back(id, std::move(value));
  return id;
}

const Array& Graph::constant_value(int id) const {
  for (const auto& [cid, v] : consts_)
    if (cid == id) return v;
  throw ValidationError("node " + std::to_string(id) + " is not a constant");
}

static void require_same_shape(const Node& x, const Node& y, int id, const char* what) {
  if (x.rows != y.rows || x.cols != y.cols)
    throw ValidationError(std::string(what) + " shape mismatch at node " + std::to_string(id) +
                          ": [" + std::to_string(x.rows) + "," + std::to_string(x.cols) +
                          "] vs [" + std::to_string(y.rows) + "," + std::to_string(y.cols) + "]");
}

int Graph::add(int a, int b) {
  const Node &na = in(a, "add"), &nb = in(b, "add");
  require_same_shape(na, nb, static_cast<int>(nodes_.size()), "add");
  return push({Op::Add, a, b, -1, na.rows, na.cols, 0, 0});
}

int Graph::sub(int a, int b) {
  const Node &na = in(a, "sub"), &nb = in(b, "sub");
  require_same_shape(na, nb, static_cast<int>(nodes_.size()), "sub");
  return push({Op::Sub, a, b, -1, na.rows, na.cols, 0, 0});
}

int Graph::mul(int a, int b) {
  const Node &na = in(a, "mul"), &nb = in(b, "mul");
  require_same_shape(na, nb, static_cast<int>(nodes_.size()), "mul");
  return push({Op::Mul, a, b, -1, na.rows, na.cols, 0, 0});
}

int Graph::div(int a, int b) {
  const Node &na = in(a, "div"), &nb = in(b, "div");
  bool scalar_divisor = nb.rows == 1 && nb.cols == 1;
  if (!scalar_divisor)
    require_same_shape(na, nb, static_cast<int>(nodes_.size()), "div");
  return push({Op::Div, a, b, -1, na.rows, na.cols, 0, 0});
}

int Graph::sigmoid(int a) {
  const Node& na = in(a, "sigmoid");
  return push({Op::Sigmoid, a, -1, -1, na.rows, na.cols, 0, 0});
}

int Graph::tanh(int a) {
  const Node& na = in(a, "tanh");
  return push({Op::TanhOp, a, -1, -1, na.rows, na.cols, 0, 0});
}

int Graph::relu(int a) {
  const Node& na = in(a, "relu");
  return push({Op::Relu, a, -1, -1, na.rows, na.cols, 0, 0});
}

int Graph::softmax(int a, int mask) {
  const Node& na = in(a, "softmax");
  if (mask >= 0) {
    const Node& nm = in(mask, "softmax");
    require_same_shape(na, nm, static_cast<int>(nodes_.size()), "softmax mask");
  }
  return push({Op::Softmax, a, mask, -1, na.rows, na.cols, 0, 0});
}

int Graph::dropout(int x, int mask) {
  const Node &nx = in(x, "dropout"), &nm = in(mask, "dropout");
  require_same_shape(nx, nm, static_cast<int>(nodes_.size()), "dropout mask");
  return push({Op::Dropout, x, mask, -1, nx.rows, nx.cols, 0, 0});
}

int Graph::bce(int y, int label) {
  const Node &ny = in(y, "bce"), &nl = in(label, "bce");
  if (ny.rows != 1 || ny.cols != 1 || nl.rows != 1 || nl.cols != 1)
    throw ValidationError("bce expects scalar prediction and label at node " +
                          std::to_string(nodes_.size()));
  return push({Op::Bce, y, label, -1, 1, 1, 0, 0});
}

static void check_mask_shape(const Node& x, const Node& m, size_t id, const char* what) {
  if (m.rows != x.rows || m.cols != 1)
    throw ValidationError(std::string(what) + " at node " + std::to_string(id) +
                          ": mask must be [" + std::to_string(x.rows) + ",1]");
}

int Graph::masked_max(int x, int mask) {
  const Node &nx = in(x, "masked_max"), &nm = in(mask, "masked_max");
  check_mask_shape(nx, nm, nodes_.size(), "masked_max");
  return push({Op::MaskedMax, x, mask, -1, 1, nx.cols, 0, 0});
}

int Graph::masked_mean(int x, int mask) {
  const Node &nx = in(x, "masked_mean"), &nm = in(mask, "masked_mean");
  check_mask_shape(nx, nm, nodes_.size(), "masked_mean");
  return push({Op::MaskedMean, x, mask, -1, 1, nx.cols, 0, 0});
}

int Graph::masked_sum(int x, int mask) {
  const Node &nx = in(x, "masked_sum"), &nm = in(mask, "masked_sum");
  check_mask_shape(nx, nm, nodes_.size(), "masked_sum");
  return push({Op::MaskedSum, x, mask, -1, 1, nx.cols, 0, 0});
}

int Graph::matmul(int a, int b) {
  const Node &na = in(a, "matmul"), &nb = in(b, "matmul");
  if (na.cols != nb.rows)
    throw ValidationError("matmul shape mismatch at node " + std::to_string(nodes_.size()) +
                          ": [" + std::to_string(na.rows) + "," + std::to_string(na.cols) +
                          "] x [" + std::to_string(nb.rows) + "," + std::to_string(nb.cols) + "]");
  return push({Op::MatMul, a, b, -1, na.rows, nb.cols, 0, 0});
}

int Graph::concat_cols(int a, int b) {
  const Node &na = in(a, "concat_cols"), &nb = in(b, "concat_cols");
  if (na.rows != nb.rows)
    throw ValidationError("concat_cols row mismatch at node " + std::to_string(nodes_.size()));
  return push({Op::ConcatCols, a, b, -1, na.rows, na.cols + nb.cols, 0, 0});
}

int Graph::concat_rows(int a, int b) {
  const Node &na = in(a, "concat_rows"), &nb = in(b, "concat_rows");
  if (na.cols != nb.cols)
    throw ValidationError("concat_rows column mismatch at node " + std::to_string(nodes_.size()));
  return push({Op::ConcatRows, a, b, -1, na.rows + nb.rows, na.cols, 0, 0});
}

int Graph::broadcast_rows(int v, int rows) {
  const Node& nv = in(v, "broadcast_rows");
  if (nv.rows != 1)
    throw ValidationError("broadcast_rows expects a [1,d] vector at node " +
                          std::to_string(nodes_.size()));
  if (rows < 1) throw ValidationError("broadcast_rows: target rows must be positive");
  return push({Op::BroadcastRows, v, -1, -1, rows, nv.cols, rows, 0});
}

int Graph::scale_rows(int x, int s) {
  const Node &nx = in(x, "scale_rows"), &ns = in(s, "scale_rows");
  check_mask_shape(nx, ns, nodes_.size(), "scale_rows");
  return push({Op::ScaleRows, x, s, -1, nx.rows, nx.cols, 0, 0});
}

int Graph::slice_rows(int x, int start, int len) {
  const Node& nx = in(x, "slice_rows");
  if (start < 0 || len < 1 || start + len > nx.rows)
    throw ValidationError("slice_rows range [" + std::to_string(start) + "," +
                          std::to_string(start + len) + ") invalid for " +
                          std::to_string(nx.rows) + " rows at node " +
                          std::to_string(nodes_.size()));
  return push({Op::SliceRows, x, -1, -1, len, nx.cols, start, len});
}

int Graph::window_concat(int x, int width) {
  const Node& nx = in(x, "window_concat");
  if (width < 1 || width > nx.rows)
    throw ValidationError("window_concat width " + std::to_string(width) + " invalid for " +
                          std::to_string(nx.rows) + " rows at node " +
                          std::to_string(nodes_.size()));
  return push({Op::WindowConcat, x, -1, -1, nx.rows - width + 1, width * nx.cols, width, 0});
}

int Graph::embed_rows(int table, int indices) {
  const Node &nt = in(table, "embed_rows"), &ni = in(indices, "embed_rows");
  if (ni.cols != 1)
    throw ValidationError("embed_rows expects a [T,1] index column at node " +
                          std::to_string(nodes_.size()));
  return push({Op::EmbedRows, table, indices, -1, ni.rows, nt.cols, 0, 0});
}

int Graph::transpose(int a) {
  const Node& na = in(a, "transpose");
  return push({Op::Transpose, a, -1, -1, na.cols, na.rows, 0, 0});
}

// ---------------------------------------------------------------------------
// forward

void Execution::forward(const Graph& g, const ParameterStore& params, const Bindings& bindings,
                        Precision precision) {
  const size_t n = g.nodes_.size();
  val_.assign(n, nullptr);
  if (own_.size() < n) own_.resize(n);

  for (const auto& [name, id] : g.inputs_) {
    auto it = bindings.find(name);
    if (it == bindings.end()) throw ValidationError("unbound input: " + name);
    const Node& nd = g.nodes_[id];
    if (it->second.rows != nd.rows || it->second.cols != nd.cols)
      throw ValidationError("input " + name + " bound with shape [" +
                            std::to_string(it->second.rows) + "," +
                            std::to_string(it->second.cols) + "], graph expects [" +
                            std::to_string(nd.rows) + "," + std::to_string(nd.cols) + "]");
    val_[id] = &it->second;
  }
  for (const auto& [name, id] : g.params_) {
    if (!params.has(name)) throw ValidationError("unbound parameter: " + name);
    const Array& p = params.get(name);
    const Node& nd = g.nodes_[id];
    if (p.rows != nd.rows || p.cols != nd.cols)
      throw ValidationError("parameter " + name + " has shape [" + std::to_string(p.rows) + "," +
                            std::to_string(p.cols) + "], graph expects [" +
                            std::to_string(nd.rows) + "," + std::to_string(nd.cols) + "]");
    val_[id] = &p;
  }
  for (const auto& [id, v] : g.consts_) val_[id] = &v;

  for (size_t i = 0; i < n; ++i) {
    const Node& nd = g.nodes_[i];
    if (nd.op == Op::Input || nd.op == Op::Param || nd.op == Op::Constant) {
      if (!val_[i]) throw ValidationError("unbound " + node_str(static_cast<int>(i), nd.op));
      continue;
    }
    Array& out = own_[i];
    out.resize(nd.rows, nd.cols);
    const Array* A = nd.a >= 0 ? val_[nd.a] : nullptr;
    const Array* B = nd.b >= 0 ? val_[nd.b] : nullptr;

    switch (nd.op) {
      case Op::Add:
        emap(out) = emap(*A) + emap(*B);
        break;
      case Op::Sub:
        emap(out) = emap(*A) - emap(*B);
        break;
      case Op::Mul:
        emap(out) = emap(*A).cwiseProduct(emap(*B));
        break;
      case Op::Div:
        if (B->rows == 1 && B->cols == 1 && !(A->rows == 1 && A->cols == 1)) {
          emap(out) = emap(*A) / B->data[0];
        } else {
          emap(out) = emap(*A).cwiseQuotient(emap(*B));
        }
        break;
      case Op::Sigmoid:
        for (size_t k = 0; k < A->size(); ++k) out.data[k] = 1.0 / (1.0 + std::exp(-A->data[k]));
        break;
      case Op::TanhOp:
        for (size_t k = 0; k < A->size(); ++k) out.data[k] = std::tanh(A->data[k]);
        break;
      case Op::Relu:
        for (size_t k = 0; k < A->size(); ++k) out.data[k] = A->data[k] > 0.0 ? A->data[k] : 0.0;
        break;
      case Op::Softmax: {
        for (int r = 0; r < A->rows; ++r) {
          const double* x = &A->data[static_cast<size_t>(r) * A->cols];
          const double* m = B ? &B->data[static_cast<size_t>(r) * B->cols] : nullptr;
          double* y = &out.data[static_cast<size_t>(r) * out.cols];
          double mx = -std::numeric_limits<double>::infinity();
          for (int c = 0; c < A->cols; ++c)
            if ((!m || m[c] != 0.0) && x[c] > mx) mx = x[c];
          if (!std::isfinite(mx))
            throw ComputeError("softmax over fully masked row at " +
                               node_str(static_cast<int>(i), nd.op));
          double z = 0.0;
          for (int c = 0; c < A->cols; ++c) {
            double e = (!m || m[c] != 0.0) ? std::exp(x[c] - mx) : 0.0;
            y[c] = e;
            z += e;
          }
          for (int c = 0; c < A->cols; ++c) y[c] /= z;
        }
        break;
      }
      case Op::Dropout:
        emap(out) = emap(*A).cwiseProduct(emap(*B));
        break;
      case Op::Bce: {
        double y = std::clamp(A->data[0], kBceClamp, 1.0 - kBceClamp);
        double l = B->data[0];
        out.data[0] = -l * std::log(y) - (1.0 - l) * std::log(1.0 - y);
        break;
      }
      case Op::MaskedMax: {
        int picked = -1;
        for (int c = 0; c < A->cols; ++c) {
          double best = 0.0;
          picked = -1;
          for (int r = 0; r < A->rows; ++r) {
            if (B->data[r] == 0.0) continue;
            double v = A->at(r, c);
            if (picked < 0 || v > best) {  // ties keep the lowest index
              best = v;
              picked = r;
            }
          }
          if (picked < 0)
            throw ComputeError("masked_max over all-masked input at " +
                               node_str(static_cast<int>(i), nd.op));
          out.data[c] = best;
        }
        break;
      }
      case Op::MaskedMean:
      case Op::MaskedSum: {
        double count = 0.0;
        for (int r = 0; r < A->rows; ++r) count += B->data[r];
        if (nd.op == Op::MaskedMean && count == 0.0)
          throw ComputeError("masked_mean over all-masked input at " +
                             node_str(static_cast<int>(i), nd.op));
        for (int c = 0; c < A->cols; ++c) {
          double s = 0.0;
          for (int r = 0; r < A->rows; ++r)
            if (B->data[r] != 0.0) s += A->at(r, c) * B->data[r];
          out.data[c] = nd.op == Op::MaskedMean ? s / count : s;
        }
        break;
      }
      case Op::MatMul:
        emap(out).noalias() = emap(*A) * emap(*B);
        break;
      case Op::ConcatCols:
        for (int r = 0; r < nd.rows; ++r) {
          std::copy_n(&A->data[static_cast<size_t>(r) * A->cols], A->cols,
                      &out.data[static_cast<size_t>(r) * nd.cols]);
          std::copy_n(&B->data[static_cast<size_t>(r) * B->cols], B->cols,
                      &out.data[static_cast<size_t>(r) * nd.cols + A->cols]);
        }
        break;
      case Op::ConcatRows:
        std::copy(A->data.begin(), A->data.end(), out.data.begin());
        std::copy(B->data.begin(), B->data.end(), out.data.begin() + A->data.size());
        break;
      case Op::BroadcastRows:
        for (int r = 0; r < nd.rows; ++r)
          std::copy_n(A->data.data(), A->cols, &out.data[static_cast<size_t>(r) * nd.cols]);
        break;
      case Op::ScaleRows:
        for (int r = 0; r < nd.rows; ++r) {
          double s = B->data[r];
          for (int c = 0; c < nd.cols; ++c) out.at(r, c) = A->at(r, c) * s;
        }
        break;
      case Op::SliceRows:
        std::copy_n(&A->data[static_cast<size_t>(nd.iattr) * A->cols],
                    static_cast<size_t>(nd.iattr2) * A->cols, out.data.data());
        break;
      case Op::WindowConcat: {
        const int w = nd.iattr, d = A->cols;
        for (int t = 0; t < nd.rows; ++t)
          for (int j = 0; j < w; ++j)
            std::copy_n(&A->data[static_cast<size_t>(t + j) * d], d,
                        &out.data[static_cast<size_t>(t) * nd.cols + static_cast<size_t>(j) * d]);
        break;
      }
      case Op::EmbedRows: {
        const int d = A->cols;
        for (int t = 0; t < nd.rows; ++t) {
          int idx = static_cast<int>(B->data[t]);
          double* dst = &out.data[static_cast<size_t>(t) * d];
          if (idx < 0) {
            std::fill_n(dst, d, 0.0);
          } else if (idx >= A->rows) {
            throw ComputeError("embed_rows index " + std::to_string(idx) + " out of range at " +
                               node_str(static_cast<int>(i), nd.op));
          } else {
            std::copy_n(&A->data[static_cast<size_t>(idx) * d], d, dst);
          }
        }
        break;
      }
      case Op::Transpose:
        emap(out) = emap(*A).transpose();
        break;
      default:
        throw ComputeError("unexpected op in forward at node " + std::to_string(i));
    }
    narrow_storage(out, precision);
    val_[i] = &out;
  }
}

// ---------------------------------------------------------------------------
// backward

Array& Execution::grad_buffer(const Graph& g, int id) {
  Array& gr = grad_[id];
  if (!has_grad_[id]) {
    gr.resize(g.nodes_[id].rows, g.nodes_[id].cols);
    gr.fill(0.0);
    has_grad_[id] = 1;
  }
  return gr;
}

void Execution::backward(const Graph& g, int loss_node) {
  const size_t n = g.nodes_.size();
  if (loss_node < 0 || loss_node >= static_cast<int>(n))
    throw ValidationError("backward: loss node id out of range");
  const Node& ln = g.nodes_[loss_node];
  if (ln.rows != 1 || ln.cols != 1)
    throw ValidationError("backward: loss node must be scalar, got [" + std::to_string(ln.rows) +
                          "," + std::to_string(ln.cols) + "]");
  if (val_.size() != n || !val_[loss_node])
    throw ComputeError("backward called before forward");

  grad_.resize(n);
  has_grad_.assign(n, 0);
  grad_buffer(g, loss_node).data[0] = 1.0;

  for (int i = loss_node; i >= 0; --i) {
    const Node& nd = g.nodes_[i];
    if (!has_grad_[i]) continue;
    const Array& G = grad_[i];
    const Array* A = nd.a >= 0 ? val_[nd.a] : nullptr;
    const Array* B = nd.b >= 0 ? val_[nd.b] : nullptr;
    const Array& Y = *val_[i];

    switch (nd.op) {
      case Op::Input:
      case Op::Param:
      case Op::Constant:
        break;
      case Op::Add:
        emap(grad_buffer(g, nd.a)) += emap(G);
        emap(grad_buffer(g, nd.b)) += emap(G);
        break;
      case Op::Sub:
        emap(grad_buffer(g, nd.a)) += emap(G);
        emap(grad_buffer(g, nd.b)) -= emap(G);
        break;
      case Op::Mul:
        emap(grad_buffer(g, nd.a)) += emap(G).cwiseProduct(emap(*B));
        emap(grad_buffer(g, nd.b)) += emap(G).cwiseProduct(emap(*A));
        break;
      case Op::Div:
        if (B->rows == 1 && B->cols == 1 && !(A->rows == 1 && A->cols == 1)) {
          double bv = B->data[0];
          emap(grad_buffer(g, nd.a)) += emap(G) / bv;
          grad_buffer(g, nd.b).data[0] -=
              (emap(G).cwiseProduct(emap(*A))).sum() / (bv * bv);
        } else {
          emap(grad_buffer(g, nd.a)) += emap(G).cwiseQuotient(emap(*B));
          emap(grad_buffer(g, nd.b)) -=
              emap(G).cwiseProduct(emap(*A)).cwiseQuotient(emap(*B).cwiseProduct(emap(*B)));
        }
        break;
      case Op::Sigmoid: {
        Array& da = grad_buffer(g, nd.a);
        for (size_t k = 0; k < Y.size(); ++k)
          da.data[k] += G.data[k] * Y.data[k] * (1.0 - Y.data[k]);
        break;
      }
      case Op::TanhOp: {
        Array& da = grad_buffer(g, nd.a);
        for (size_t k = 0; k < Y.size(); ++k)
          da.data[k] += G.data[k] * (1.0 - Y.data[k] * Y.data[k]);
        break;
      }
      case Op::Relu: {
        // subgradient 0 at the kink
        Array& da = grad_buffer(g, nd.a);
        for (size_t k = 0; k < Y.size(); ++k)
          if (A->data[k] > 0.0) da.data[k] += G.data[k];
        break;
      }
      case Op::Softmax: {
        Array& da = grad_buffer(g, nd.a);
        for (int r = 0; r < Y.rows; ++r) {
          const double* y = &Y.data[static_cast<size_t>(r) * Y.cols];
          const double* gr = &G.data[static_cast<size_t>(r) * G.cols];
          const double* m = B ? &B->data[static_cast<size_t>(r) * B->cols] : nullptr;
          double dot = 0.0;
          for (int c = 0; c < Y.cols; ++c) dot += gr[c] * y[c];
          double* d = &da.data[static_cast<size_t>(r) * da.cols];
          for (int c = 0; c < Y.cols; ++c)
            if (!m || m[c] != 0.0) d[c] += y[c] * (gr[c] - dot);
        }
        break;
      }
      case Op::Dropout:
        emap(grad_buffer(g, nd.a)) += emap(G).cwiseProduct(emap(*B));
        break;
      case Op::Bce: {
        double y = A->data[0];
        if (y > kBceClamp && y < 1.0 - kBceClamp) {
          double l = B->data[0];
          grad_buffer(g, nd.a).data[0] += G.data[0] * (-l / y + (1.0 - l) / (1.0 - y));
        }
        double yc = std::clamp(y, kBceClamp, 1.0 - kBceClamp);
        grad_buffer(g, nd.b).data[0] += G.data[0] * (std::log(1.0 - yc) - std::log(yc));
        break;
      }
      case Op::MaskedMax: {
        Array& da = grad_buffer(g, nd.a);
        for (int c = 0; c < A->cols; ++c) {
          int picked = -1;
          double best = 0.0;
          for (int r = 0; r < A->rows; ++r) {
            if (B->data[r] == 0.0) continue;
            double v = A->at(r, c);
            if (picked < 0 || v > best) {
              best = v;
              picked = r;
            }
          }
          da.at(picked, c) += G.data[c];
        }
        break;
      }
      case Op::MaskedMean:
      case Op::MaskedSum: {
        Array& da = grad_buffer(g, nd.a);
        double count = 0.0;
        for (int r = 0; r < A->rows; ++r) count += B->data[r];
        double scale = nd.op == Op::MaskedMean ? 1.0 / count : 1.0;
        for (int r = 0; r < A->rows; ++r) {
          if (B->data[r] == 0.0) continue;
          for (int c = 0; c < A->cols; ++c) da.at(r, c) += G.data[c] * B->data[r] * scale;
        }
        break;
      }
      case Op::MatMul:
        emap(grad_buffer(g, nd.a)).noalias() += emap(G) * emap(*B).transpose();
        emap(grad_buffer(g, nd.b)).noalias() += emap(*A).transpose() * emap(G);
        break;
      case Op::ConcatCols: {
        Array& da = grad_buffer(g, nd.a);
        Array& db = grad_buffer(g, nd.b);
        for (int r = 0; r < nd.rows; ++r) {
          for (int c = 0; c < A->cols; ++c) da.at(r, c) += G.at(r, c);
          for (int c = 0; c < B->cols; ++c) db.at(r, c) += G.at(r, A->cols + c);
        }
        break;
      }
      case Op::ConcatRows: {
        Array& da = grad_buffer(g, nd.a);
        Array& db = grad_buffer(g, nd.b);
        for (size_t k = 0; k < A->size(); ++k) da.data[k] += G.data[k];
        for (size_t k = 0; k < B->size(); ++k) db.data[k] += G.data[A->size() + k];
        break;
      }
      case Op::BroadcastRows: {
        Array& da = grad_buffer(g, nd.a);
        for (int r = 0; r < nd.rows; ++r)
          for (int c = 0; c < nd.cols; ++c) da.data[c] += G.at(r, c);
        break;
      }
      case Op::ScaleRows: {
        Array& da = grad_buffer(g, nd.a);
        Array& db = grad_buffer(g, nd.b);
        for (int r = 0; r < nd.rows; ++r) {
          double s = B->data[r];
          double acc = 0.0;
          for (int c = 0; c < nd.cols; ++c) {
            da.at(r, c) += G.at(r, c) * s;
            acc += G.at(r, c) * A->at(r, c);
          }
          db.data[r] += acc;
        }
        break;
      }
      case Op::SliceRows: {
        Array& da = grad_buffer(g, nd.a);
        for (int r = 0; r < nd.rows; ++r)
          for (int c = 0; c < nd.cols; ++c) da.at(nd.iattr + r, c) += G.at(r, c);
        break;
      }
      case Op::WindowConcat: {
        Array& da = grad_buffer(g, nd.a);
        const int w = nd.iattr, d = A->cols;
        for (int t = 0; t < nd.rows; ++t)
          for (int j = 0; j < w; ++j)
            for (int c = 0; c < d; ++c) da.at(t + j, c) += G.at(t, j * d + c);
        break;
      }
      case Op::EmbedRows: {
        Array& da = grad_buffer(g, nd.a);
        const int d = A->cols;
        for (int t = 0; t < nd.rows; ++t) {
          int idx = static_cast<int>(B->data[t]);
          if (idx < 0) continue;
          for (int c = 0; c < d; ++c) da.at(idx, c) += G.at(t, c);
        }
        break;
      }
      case Op::Transpose:
        emap(grad_buffer(g, nd.a)) += emap(G).transpose();
        break;
    }
  }

  // make untouched gradients visible as empty (zero) arrays
  for (size_t i = 0; i < n; ++i)
    if (!has_grad_[i]) grad_[i] = Array();
}

GradientMap Execution::parameter_gradients(const Graph& g) const {
  GradientMap out;
  for (const auto& [name, id] : g.params_) {
    if (id < static_cast<int>(grad_.size()) && grad_[id].rows > 0) {
      out[name] = grad_[id];
    } else {
      out[name] = Array::zeros(g.nodes_[id].rows, g.nodes_[id].cols);
    }
  }
  return out;
}

std::vector<Array> forward_all(const Graph& g, const ParameterStore& params,
                               const Bindings& bindings, Precision precision) {
  Execution ex;
  ex.forward(g, params, bindings, precision);
  std::vector<Array> out(g.size());
  for (size_t i = 0; i < g.size(); ++i) out[i] = ex.value(static_cast<int>(i));
  return out;
}

GradientMap backward_params(const Graph& g, int loss_node, const ParameterStore& params,
                            const Bindings& bindings, Precision precision) {
  Execution ex;
  ex.forward(g, params, bindings, precision);
  ex.backward(g, loss_node);
  return ex.parameter_gradients(g);
}

}  // namespace evidentia
