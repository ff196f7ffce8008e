#pragma once

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "comix/tensor.hpp"

namespace comix::nn {

struct Param;
class Graph;

// Lightweight handle to a node on a Graph tape.
class Value {
 public:
  Value() = default;
  const Tensor& val() const;
  int rows() const { return val().rows(); }
  int cols() const { return val().cols(); }
  bool valid() const { return g_ != nullptr; }
  int id() const { return id_; }

 private:
  friend class Graph;
  Value(Graph* g, int id) : g_(g), id_(id) {}
  Graph* g_ = nullptr;
  int id_ = -1;
};

// Reverse-mode tape. Operations append nodes in evaluation order, so the
// reverse of creation order is a valid topological order for backward();
// the append-only construction makes recorded graphs acyclic by design.
// A Graph instance records one forward pass and is not thread-safe.
class Graph {
 public:
  Value constant(Tensor t);
  Value zeros(int rows, int cols) { return constant(Tensor::zeros(rows, cols)); }
  // Leaf bound to an external parameter; gradients accumulate into
  // p.grad after backward(). Repeated calls with the same Param on the
  // same tape return the same node.
  Value param(Param& p);

  Value matmul(Value a, Value b);
  Value add(Value a, Value b);   // b may be a single row broadcast over a's rows
  Value sub(Value a, Value b);   // same broadcast rule for b
  Value mul(Value a, Value b);   // elementwise; b may be a broadcast row
  Value scalar_mul(Value a, double c);
  Value relu(Value a);
  Value sigmoid(Value a);
  Value tanh(Value a);
  Value abs(Value a);
  Value concat_cols(const std::vector<Value>& parts);
  Value slice_cols(Value a, int start, int len);
  Value stack_rows(const std::vector<Value>& parts);  // all parts same col count
  Value row_sum(Value a);   // [r x c] -> [r x 1]
  Value sum_all(Value a);   // -> [1 x 1]
  Value mean_all(Value a);  // -> [1 x 1]
  // Per-row normalization over the feature dimension with learned scale
  // and shift (gamma/beta are [1 x c]).
  Value layer_norm(Value x, Value gamma, Value beta, double eps = 1e-5);
  // Per-row matrix-vector product: w is [B x (in*out)] holding a row-major
  // (in x out) matrix per row, x is [B x in]; result [B x out]. This is how
  // hypernetwork-generated mixer weights are applied per sample.
  Value hyper_matvec(Value w, Value x, int in_w, int out_w);
  // Row r multiplied by the constant factor s[r] (no gradient into s).
  Value scale_rows(Value a, std::vector<double> s);
  // Identity forward; blocks gradient propagation into a.
  Value stop_grad(Value a);

  // Populates gradients of `loss` (must be 1x1) w.r.t. every reachable
  // node and accumulates into the bound external Param::grad slots.
  void backward(Value loss);

  const Tensor& val(int id) const { return nodes_[id].val; }
  const Tensor& grad(int id) const { return nodes_[id].grad; }
  int node_count() const { return static_cast<int>(nodes_.size()); }

 private:
  enum class Op : uint8_t {
    Constant, ParamLeaf, MatMul, Add, Sub, Mul, ScalarMul, Relu, Sigmoid,
    Tanh, Abs, ConcatCols, SliceCols, StackRows, RowSum, SumAll, MeanAll,
    LayerNorm, HyperMatVec, ScaleRows, StopGrad,
  };
  struct Node {
    Tensor val;
    Tensor grad;
    Op op = Op::Constant;
    std::array<int, 3> in{-1, -1, -1};
    std::vector<int> ins;       // n-ary ops (concat/stack)
    int i0 = 0, i1 = 0;         // op-specific integers
    double c = 0.0;             // op-specific scalar
    std::vector<double> aux;    // saved stats (layer-norm), row factors
    Param* ext = nullptr;       // param binding
  };

  int push(Node n);
  Value wrap(int id) { return Value(this, id); }
  void backward_node(int id);
  static void check_same_or_rowcast(const Tensor& a, const Tensor& b, const char* op);

  std::vector<Node> nodes_;
  std::unordered_map<const Param*, int> param_nodes_;

  friend class Value;
};

}  // namespace comix::nn
