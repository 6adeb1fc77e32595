#pragma once

#include <map>
#include <string>
#include <vector>

#include "evidentia/array.hpp"
#include "evidentia/error.hpp"
#include "evidentia/params.hpp"

namespace evidentia {

// Reverse-mode differentiation over dense arrays.
//
// A Graph is a flat list of operation records in construction order, which
// is also a topological order (an op can only reference earlier nodes).
// Graphs are built once per batch shape; variable sentence lengths and
// evidence counts are handled by padding plus {0,1} masks, never by
// rebuilding per example.
//
// Time runs along rows: a sentence is [T, d], its mask [T, 1]. Reductions
// over the time axis produce [1, d]; softmax normalizes along the last
// axis (per row).

enum class Op {
  // leaves
  Input,
  Param,
  Constant,
  // elementwise / activations
  Add,
  Sub,
  Mul,
  Div,  // same shape, or divisor [1,1]
  Sigmoid,
  TanhOp,
  Relu,
  Softmax,  // per row; optional mask input zeroes padded columns
  Dropout,  // multiply by a pre-scaled {0, 1/q} mask binding
  Bce,      // binary cross-entropy of a scalar prediction vs a scalar label
  // reductions over the time axis
  MaskedMax,
  MaskedMean,
  MaskedSum,
  // structure
  MatMul,
  ConcatCols,
  ConcatRows,
  BroadcastRows,  // [1,d] -> [T,d]
  ScaleRows,      // [T,d] * [T,1], row-wise
  SliceRows,      // rows [start, start+len)
  WindowConcat,   // [T,d] -> [T-w+1, w*d]; window t = rows t..t+w-1 side by side
  EmbedRows,      // gather rows of a table by index column; index -1 -> zero row
  Transpose,
};

const char* op_name(Op op);

struct Node {
  Op op = Op::Constant;
  int a = -1, b = -1, c = -1;  // input node ids
  int rows = 0, cols = 0;      // output shape
  int iattr = 0;               // width / slice start / broadcast rows
  int iattr2 = 0;              // slice length
};

using Bindings = std::map<std::string, Array>;
using GradientMap = std::map<std::string, Array>;

class Graph {
 public:
  int input(const std::string& name, int rows, int cols);
  int param(const std::string& name, int rows, int cols);
  int constant(Array value);

  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int div(int a, int b);
  int sigmoid(int a);
  int tanh(int a);
  int relu(int a);
  int softmax(int a, int mask = -1);
  int dropout(int x, int mask);
  int bce(int y, int label);
  int masked_max(int x, int mask);
  int masked_mean(int x, int mask);
  int masked_sum(int x, int mask);
  int matmul(int a, int b);
  int concat_cols(int a, int b);
  int concat_rows(int a, int b);
  int broadcast_rows(int v, int rows);
  int scale_rows(int x, int s);
  int slice_rows(int x, int start, int len);
  int window_concat(int x, int width);
  int embed_rows(int table, int indices);
  int transpose(int a);

  size_t size() const { return nodes_.size(); }
  const Node& node(int id) const { return nodes_[id]; }
  const std::map<std::string, int>& inputs() const { return inputs_; }
  const std::map<std::string, int>& params() const { return params_; }
  const Array& constant_value(int id) const;

 private:
  int push(Node n);
  const Node& in(int id, const char* ctx) const;

  std::vector<Node> nodes_;
  std::map<std::string, int> inputs_;
  std::map<std::string, int> params_;
  std::vector<std::pair<int, Array>> consts_;

  friend class Execution;
};

// Reusable workspace: per-node value views and gradient buffers. Keeping one
// Execution alive across forward/backward calls avoids reallocating every
// intermediate on every step.
class Execution {
 public:
  void forward(const Graph& g, const ParameterStore& params, const Bindings& bindings,
               Precision precision = Precision::f64);

  // Gradient of the scalar loss node w.r.t. every node; fills grad buffers.
  void backward(const Graph& g, int loss_node);

  const Array& value(int id) const { return *val_[id]; }
  // Empty array means the node was not reached (gradient identically zero).
  const Array& gradient(int id) const { return grad_[id]; }

  // Gradients keyed by parameter name; parameters off the loss path come
  // back as zero arrays of the parameter shape.
  GradientMap parameter_gradients(const Graph& g) const;

 private:
  std::vector<const Array*> val_;
  std::vector<Array> own_;
  std::vector<Array> grad_;
  std::vector<char> has_grad_;

  Array& grad_buffer(const Graph& g, int id);
};

// One-shot convenience wrappers around Execution.
std::vector<Array> forward_all(const Graph& g, const ParameterStore& params,
                               const Bindings& bindings, Precision precision = Precision::f64);
GradientMap backward_params(const Graph& g, int loss_node, const ParameterStore& params,
                            const Bindings& bindings, Precision precision = Precision::f64);

}  // namespace evidentia
