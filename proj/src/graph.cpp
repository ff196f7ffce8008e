#include "comix/graph.hpp"

#include <cmath>
#include <utility>

#include "comix/errors.hpp"
#include "comix/modules.hpp"

namespace comix::nn {

const Tensor& Value::val() const {
  if (!g_) throw ContractViolation("Value::val on empty handle");
  return g_->val(id_);
}

int Graph::push(Node n) {
  int id = static_cast<int>(nodes_.size());
  nodes_.push_back(std::move(n));
  return id;
}

void Graph::check_same_or_rowcast(const Tensor& a, const Tensor& b, const char* op) {
  if (a.same_shape(b)) return;
  if (b.rows() == 1 && b.cols() == a.cols()) return;
  throw ContractViolation(std::string(op) + ": shape mismatch " + a.shape_str() +
                          " vs " + b.shape_str());
}

Value Graph::constant(Tensor t) {
  Node n;
  n.op = Op::Constant;
  n.val = std::move(t);
  return wrap(push(std::move(n)));
}

Value Graph::param(Param& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return wrap(it->second);
  Node n;
  n.op = Op::ParamLeaf;
  n.val = p.value;
  n.ext = &p;
  int id = push(std::move(n));
  param_nodes_.emplace(&p, id);
  return wrap(id);
}

Value Graph::matmul(Value a, Value b) {
  const Tensor& A = val(a.id());
  const Tensor& B = val(b.id());
  if (A.cols() != B.rows())
    throw ContractViolation("matmul: inner dims " + A.shape_str() + " * " + B.shape_str());
  Node n;
  n.op = Op::MatMul;
  n.in = {a.id(), b.id(), -1};
  n.val = Tensor::zeros(A.rows(), B.cols());
  gemm_nn(A, B, n.val);
  return wrap(push(std::move(n)));
}

Value Graph::add(Value a, Value b) {
  const Tensor& A = val(a.id());
  const Tensor& B = val(b.id());
  check_same_or_rowcast(A, B, "add");
  Node n;
  n.op = Op::Add;
  n.in = {a.id(), b.id(), -1};
  n.val = A;
  const bool bc = B.rows() == 1 && A.rows() != 1;
  for (int r = 0; r < A.rows(); ++r)
    for (int c = 0; c < A.cols(); ++c)
      n.val.at(r, c) += B.at(bc ? 0 : r, c);
  return wrap(push(std::move(n)));
}

Value Graph::sub(Value a, Value b) {
  const Tensor& A = val(a.id());
  const Tensor& B = val(b.id());
  check_same_or_rowcast(A, B, "sub");
  Node n;
  n.op = Op::Sub;
  n.in = {a.id(), b.id(), -1};
  n.val = A;
  const bool bc = B.rows() == 1 && A.rows() != 1;
  for (int r = 0; r < A.rows(); ++r)
    for (int c = 0; c < A.cols(); ++c)
      n.val.at(r, c) -= B.at(bc ? 0 : r, c);
  return wrap(push(std::move(n)));
}

Value Graph::mul(Value a, Value b) {
  const Tensor& A = val(a.id());
  const Tensor& B = val(b.id());
  check_same_or_rowcast(A, B, "mul");
  Node n;
  n.op = Op::Mul;
  n.in = {a.id(), b.id(), -1};
  n.val = A;
  const bool bc = B.rows() == 1 && A.rows() != 1;
  for (int r = 0; r < A.rows(); ++r)
    for (int c = 0; c < A.cols(); ++c)
      n.val.at(r, c) *= B.at(bc ? 0 : r, c);
  return wrap(push(std::move(n)));
}

Value Graph::scalar_mul(Value a, double c) {
  Node n;
  n.op = Op::ScalarMul;
  n.in = {a.id(), -1, -1};
  n.c = c;
  n.val = val(a.id());
  for (double& x : n.val.v) x *= c;
  return wrap(push(std::move(n)));
}

Value Graph::relu(Value a) {
  Node n;
  n.op = Op::Relu;
  n.in = {a.id(), -1, -1};
  n.val = val(a.id());
  for (double& x : n.val.v)
    if (x < 0.0) x = 0.0;
  return wrap(push(std::move(n)));
}

Value Graph::sigmoid(Value a) {
  Node n;
  n.op = Op::Sigmoid;
  n.in = {a.id(), -1, -1};
  n.val = val(a.id());
  for (double& x : n.val.v) x = 1.0 / (1.0 + std::exp(-x));
  return wrap(push(std::move(n)));
}

Value Graph::tanh(Value a) {
  Node n;
  n.op = Op::Tanh;
  n.in = {a.id(), -1, -1};
  n.val = val(a.id());
  for (double& x : n.val.v) x = std::tanh(x);
  return wrap(push(std::move(n)));
}

Value Graph::abs(Value a) {
  Node n;
  n.op = Op::Abs;
  n.in = {a.id(), -1, -1};
  n.val = val(a.id());
  for (double& x : n.val.v) x = std::fabs(x);
  return wrap(push(std::move(n)));
}

Value Graph::concat_cols(const std::vector<Value>& parts) {
  if (parts.empty()) throw ContractViolation("concat_cols: empty");
  int rows = val(parts[0].id()).rows();
  int cols = 0;
  for (const Value& p : parts) {
    if (val(p.id()).rows() != rows) throw ContractViolation("concat_cols: row mismatch");
    cols += val(p.id()).cols();
  }
  Node n;
  n.op = Op::ConcatCols;
  for (const Value& p : parts) n.ins.push_back(p.id());
  n.val = Tensor::zeros(rows, cols);
  int off = 0;
  for (const Value& p : parts) {
    const Tensor& t = val(p.id());
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < t.cols(); ++c)
        n.val.at(r, off + c) = t.at(r, c);
    off += t.cols();
  }
  return wrap(push(std::move(n)));
}

Value Graph::slice_cols(Value a, int start, int len) {
  const Tensor& A = val(a.id());
  if (start < 0 || len <= 0 || start + len > A.cols())
    throw ContractViolation("slice_cols: range out of bounds");
  Node n;
  n.op = Op::SliceCols;
  n.in = {a.id(), -1, -1};
  n.i0 = start;
  n.i1 = len;
  n.val = Tensor::zeros(A.rows(), len);
  for (int r = 0; r < A.rows(); ++r)
    for (int c = 0; c < len; ++c)
      n.val.at(r, c) = A.at(r, start + c);
  return wrap(push(std::move(n)));
}

Value Graph::stack_rows(const std::vector<Value>& parts) {
  if (parts.empty()) throw ContractViolation("stack_rows: empty");
  int cols = val(parts[0].id()).cols();
  int rows = 0;
  for (const Value& p : parts) {
    if (val(p.id()).cols() != cols) throw ContractViolation("stack_rows: col mismatch");
    rows += val(p.id()).rows();
  }
  Node n;
  n.op = Op::StackRows;
  for (const Value& p : parts) n.ins.push_back(p.id());
  n.val = Tensor::zeros(rows, cols);
  int off = 0;
  for (const Value& p : parts) {
    const Tensor& t = val(p.id());
    for (int r = 0; r < t.rows(); ++r)
      for (int c = 0; c < cols; ++c)
        n.val.at(off + r, c) = t.at(r, c);
    off += t.rows();
  }
  return wrap(push(std::move(n)));
}

Value Graph::row_sum(Value a) {
  const Tensor& A = val(a.id());
  Node n;
  n.op = Op::RowSum;
  n.in = {a.id(), -1, -1};
  n.val = Tensor::zeros(A.rows(), 1);
  for (int r = 0; r < A.rows(); ++r) {
    double s = 0.0;
    for (int c = 0; c < A.cols(); ++c) s += A.at(r, c);
    n.val.at(r, 0) = s;
  }
  return wrap(push(std::move(n)));
}

Value Graph::sum_all(Value a) {
  const Tensor& A = val(a.id());
  double s = 0.0;
  for (double x : A.v) s += x;
  Node n;
  n.op = Op::SumAll;
  n.in = {a.id(), -1, -1};
  n.val = Tensor::scalar(s);
  return wrap(push(std::move(n)));
}

Value Graph::mean_all(Value a) {
  const Tensor& A = val(a.id());
  double s = 0.0;
  for (double x : A.v) s += x;
  Node n;
  n.op = Op::MeanAll;
  n.in = {a.id(), -1, -1};
  n.val = Tensor::scalar(s / static_cast<double>(A.size()));
  return wrap(push(std::move(n)));
}

Value Graph::layer_norm(Value x, Value gamma, Value beta, double eps) {
  const Tensor& X = val(x.id());
  const Tensor& G = val(gamma.id());
  const Tensor& B = val(beta.id());
  if (G.rows() != 1 || G.cols() != X.cols() || B.rows() != 1 || B.cols() != X.cols())
    throw ContractViolation("layer_norm: gamma/beta must be [1 x cols]");
  Node n;
  n.op = Op::LayerNorm;
  n.in = {x.id(), gamma.id(), beta.id()};
  n.val = Tensor::zeros(X.rows(), X.cols());
  // aux layout: rows*cols normalized values, then rows inverse stddevs.
  n.aux.resize(static_cast<size_t>(X.rows()) * X.cols() + X.rows());
  const int C = X.cols();
  for (int r = 0; r < X.rows(); ++r) {
    double m = 0.0;
    for (int c = 0; c < C; ++c) m += X.at(r, c);
    m /= C;
    double var = 0.0;
    for (int c = 0; c < C; ++c) {
      double d = X.at(r, c) - m;
      var += d * d;
    }
    var /= C;
    double inv_s = 1.0 / std::sqrt(var + eps);
    n.aux[static_cast<size_t>(X.rows()) * C + r] = inv_s;
    for (int c = 0; c < C; ++c) {
      double xh = (X.at(r, c) - m) * inv_s;
      n.aux[static_cast<size_t>(r) * C + c] = xh;
      n.val.at(r, c) = G.at(0, c) * xh + B.at(0, c);
    }
  }
  return wrap(push(std::move(n)));
}

Value Graph::hyper_matvec(Value w, Value x, int in_w, int out_w) {
  const Tensor& W = val(w.id());
  const Tensor& X = val(x.id());
  if (W.rows() != X.rows() || W.cols() != in_w * out_w || X.cols() != in_w)
    throw ContractViolation("hyper_matvec: got w " + W.shape_str() + " x " + X.shape_str());
  Node n;
  n.op = Op::HyperMatVec;
  n.in = {w.id(), x.id(), -1};
  n.i0 = in_w;
  n.i1 = out_w;
  n.val = Tensor::zeros(X.rows(), out_w);
  for (int r = 0; r < X.rows(); ++r)
    for (int i = 0; i < in_w; ++i) {
      double xv = X.at(r, i);
      if (xv == 0.0) continue;
      const double* wrow = &W.v[static_cast<size_t>(r) * W.cols() + static_cast<size_t>(i) * out_w];
      double* orow = &n.val.v[static_cast<size_t>(r) * out_w];
      for (int o = 0; o < out_w; ++o) orow[o] += xv * wrow[o];
    }
  return wrap(push(std::move(n)));
}

Value Graph::scale_rows(Value a, std::vector<double> s) {
  const Tensor& A = val(a.id());
  if (static_cast<int>(s.size()) != A.rows())
    throw ContractViolation("scale_rows: factor count != rows");
  Node n;
  n.op = Op::ScaleRows;
  n.in = {a.id(), -1, -1};
  n.val = A;
  for (int r = 0; r < A.rows(); ++r)
    for (int c = 0; c < A.cols(); ++c)
      n.val.at(r, c) *= s[r];
  n.aux = std::move(s);
  return wrap(push(std::move(n)));
}

Value Graph::stop_grad(Value a) {
  Node n;
  n.op = Op::StopGrad;
  n.in = {a.id(), -1, -1};
  n.val = val(a.id());
  return wrap(push(std::move(n)));
}

void Graph::backward(Value loss) {
  if (loss.id() < 0 || loss.id() >= node_count())
    throw ContractViolation("backward: loss not on this tape");
  const Tensor& L = nodes_[loss.id()].val;
  if (L.size() != 1) throw ContractViolation("backward: loss must be scalar, got " + L.shape_str());

  // Mark nodes that can influence the loss; only those get gradient storage.
  std::vector<char> needed(nodes_.size(), 0);
  needed[loss.id()] = 1;
  for (int id = loss.id(); id >= 0; --id) {
    if (!needed[id]) continue;
    const Node& n = nodes_[id];
    if (n.op == Op::StopGrad) continue;
    for (int in : n.in)
      if (in >= 0) needed[in] = 1;
    for (int in : n.ins) needed[in] = 1;
  }
  for (size_t id = 0; id < nodes_.size(); ++id) {
    if (needed[id])
      nodes_[id].grad = Tensor::zeros(nodes_[id].val.rows(), nodes_[id].val.cols());
    else
      nodes_[id].grad = Tensor{};
  }
  nodes_[loss.id()].grad.v[0] = 1.0;

  for (int id = loss.id(); id >= 0; --id)
    if (needed[id]) backward_node(id);

  for (auto& [p, id] : param_nodes_) {
    if (!needed[id]) continue;
    Param* ext = nodes_[id].ext;
    const Tensor& g = nodes_[id].grad;
    if (!ext->grad.same_shape(g))
      throw ContractViolation("backward: param grad shape drifted for " + ext->name);
    for (size_t k = 0; k < g.v.size(); ++k) ext->grad.v[k] += g.v[k];
  }
}

void Graph::backward_node(int id) {
  Node& n = nodes_[id];
  const Tensor& dy = n.grad;
  auto gref = [&](int in) -> Tensor& { return nodes_[in].grad; };
  auto has_grad = [&](int in) { return in >= 0 && !nodes_[in].grad.empty(); };

  switch (n.op) {
    case Op::Constant:
    case Op::ParamLeaf:
    case Op::StopGrad:
      break;
    case Op::MatMul: {
      const Tensor& A = nodes_[n.in[0]].val;
      const Tensor& B = nodes_[n.in[1]].val;
      if (has_grad(n.in[0])) gemm_nt(dy, B, gref(n.in[0]));
      if (has_grad(n.in[1])) gemm_tn(A, dy, gref(n.in[1]));
      break;
    }
    case Op::Add:
    case Op::Sub: {
      const double sgn = n.op == Op::Sub ? -1.0 : 1.0;
      if (has_grad(n.in[0])) {
        Tensor& da = gref(n.in[0]);
        for (size_t k = 0; k < dy.v.size(); ++k) da.v[k] += dy.v[k];
      }
      if (has_grad(n.in[1])) {
        Tensor& db = gref(n.in[1]);
        if (db.same_shape(dy)) {
          for (size_t k = 0; k < dy.v.size(); ++k) db.v[k] += sgn * dy.v[k];
        } else {  // broadcast row: reduce over rows
          for (int r = 0; r < dy.rows(); ++r)
            for (int c = 0; c < dy.cols(); ++c)
              db.at(0, c) += sgn * dy.at(r, c);
        }
      }
      break;
    }
    case Op::Mul: {
      const Tensor& A = nodes_[n.in[0]].val;
      const Tensor& B = nodes_[n.in[1]].val;
      const bool bc = B.rows() == 1 && A.rows() != 1;
      if (has_grad(n.in[0])) {
        Tensor& da = gref(n.in[0]);
        for (int r = 0; r < A.rows(); ++r)
          for (int c = 0; c < A.cols(); ++c)
            da.at(r, c) += dy.at(r, c) * B.at(bc ? 0 : r, c);
      }
      if (has_grad(n.in[1])) {
        Tensor& db = gref(n.in[1]);
        if (bc) {
          for (int r = 0; r < A.rows(); ++r)
            for (int c = 0; c < A.cols(); ++c)
              db.at(0, c) += dy.at(r, c) * A.at(r, c);
        } else {
          for (int r = 0; r < A.rows(); ++r)
            for (int c = 0; c < A.cols(); ++c)
              db.at(r, c) += dy.at(r, c) * A.at(r, c);
        }
      }
      break;
    }
    case Op::ScalarMul:
      if (has_grad(n.in[0])) {
        Tensor& da = gref(n.in[0]);
        for (size_t k = 0; k < dy.v.size(); ++k) da.v[k] += n.c * dy.v[k];
      }
      break;
    case Op::Relu:
      if (has_grad(n.in[0])) {
        const Tensor& X = nodes_[n.in[0]].val;
        Tensor& da = gref(n.in[0]);
        for (size_t k = 0; k < dy.v.size(); ++k)
          if (X.v[k] > 0.0) da.v[k] += dy.v[k];
      }
      break;
    case Op::Sigmoid:
      if (has_grad(n.in[0])) {
        Tensor& da = gref(n.in[0]);
        for (size_t k = 0; k < dy.v.size(); ++k)
          da.v[k] += dy.v[k] * n.val.v[k] * (1.0 - n.val.v[k]);
      }
      break;
    case Op::Tanh:
      if (has_grad(n.in[0])) {
        Tensor& da = gref(n.in[0]);
        for (size_t k = 0; k < dy.v.size(); ++k)
          da.v[k] += dy.v[k] * (1.0 - n.val.v[k] * n.val.v[k]);
      }
      break;
    case Op::Abs:
      if (has_grad(n.in[0])) {
        const Tensor& X = nodes_[n.in[0]].val;
        Tensor& da = gref(n.in[0]);
        for (size_t k = 0; k < dy.v.size(); ++k) {
          if (X.v[k] > 0.0) da.v[k] += dy.v[k];
          else if (X.v[k] < 0.0) da.v[k] -= dy.v[k];
        }
      }
      break;
    case Op::ConcatCols: {
      int off = 0;
      for (int in : n.ins) {
        const Tensor& part = nodes_[in].val;
        if (!nodes_[in].grad.empty()) {
          Tensor& dp = gref(in);
          for (int r = 0; r < dy.rows(); ++r)
            for (int c = 0; c < part.cols(); ++c)
              dp.at(r, c) += dy.at(r, off + c);
        }
        off += part.cols();
      }
      break;
    }
    case Op::SliceCols:
      if (has_grad(n.in[0])) {
        Tensor& da = gref(n.in[0]);
        for (int r = 0; r < dy.rows(); ++r)
          for (int c = 0; c < n.i1; ++c)
            da.at(r, n.i0 + c) += dy.at(r, c);
      }
      break;
    case Op::StackRows: {
      int off = 0;
      for (int in : n.ins) {
        const Tensor& part = nodes_[in].val;
        if (!nodes_[in].grad.empty()) {
          Tensor& dp = gref(in);
          for (int r = 0; r < part.rows(); ++r)
            for (int c = 0; c < dy.cols(); ++c)
              dp.at(r, c) += dy.at(off + r, c);
        }
        off += part.rows();
      }
      break;
    }
    case Op::RowSum:
      if (has_grad(n.in[0])) {
        Tensor& da = gref(n.in[0]);
        for (int r = 0; r < da.rows(); ++r)
          for (int c = 0; c < da.cols(); ++c)
            da.at(r, c) += dy.at(r, 0);
      }
      break;
    case Op::SumAll:
      if (has_grad(n.in[0])) {
        Tensor& da = gref(n.in[0]);
        for (double& g : da.v) g += dy.v[0];
      }
      break;
    case Op::MeanAll:
      if (has_grad(n.in[0])) {
        Tensor& da = gref(n.in[0]);
        const double f = dy.v[0] / static_cast<double>(da.size());
        for (double& g : da.v) g += f;
      }
      break;
    case Op::LayerNorm: {
      const Tensor& G = nodes_[n.in[1]].val;
      const int R = n.val.rows(), C = n.val.cols();
      const double* xhat = n.aux.data();
      const double* inv_s = n.aux.data() + static_cast<size_t>(R) * C;
      if (has_grad(n.in[2])) {  // beta
        Tensor& db = gref(n.in[2]);
        for (int r = 0; r < R; ++r)
          for (int c = 0; c < C; ++c)
            db.at(0, c) += dy.at(r, c);
      }
      if (has_grad(n.in[1])) {  // gamma
        Tensor& dg = gref(n.in[1]);
        for (int r = 0; r < R; ++r)
          for (int c = 0; c < C; ++c)
            dg.at(0, c) += dy.at(r, c) * xhat[static_cast<size_t>(r) * C + c];
      }
      if (has_grad(n.in[0])) {  // x: dx = inv_s*(g - mean(g) - xhat*mean(g*xhat))
        Tensor& dx = gref(n.in[0]);
        for (int r = 0; r < R; ++r) {
          double mg = 0.0, mgx = 0.0;
          for (int c = 0; c < C; ++c) {
            double g = dy.at(r, c) * G.at(0, c);
            mg += g;
            mgx += g * xhat[static_cast<size_t>(r) * C + c];
          }
          mg /= C;
          mgx /= C;
          for (int c = 0; c < C; ++c) {
            double g = dy.at(r, c) * G.at(0, c);
            dx.at(r, c) += inv_s[r] * (g - mg - xhat[static_cast<size_t>(r) * C + c] * mgx);
          }
        }
      }
      break;
    }
    case Op::HyperMatVec: {
      const Tensor& W = nodes_[n.in[0]].val;
      const Tensor& X = nodes_[n.in[1]].val;
      const int in_w = n.i0, out_w = n.i1;
      if (has_grad(n.in[0])) {
        Tensor& dw = gref(n.in[0]);
        for (int r = 0; r < X.rows(); ++r)
          for (int i = 0; i < in_w; ++i) {
            double xv = X.at(r, i);
            if (xv == 0.0) continue;
            for (int o = 0; o < out_w; ++o)
              dw.at(r, i * out_w + o) += xv * dy.at(r, o);
          }
      }
      if (has_grad(n.in[1])) {
        Tensor& dx = gref(n.in[1]);
        for (int r = 0; r < X.rows(); ++r)
          for (int i = 0; i < in_w; ++i) {
            double s = 0.0;
            const double* wrow = &W.v[static_cast<size_t>(r) * W.cols() + static_cast<size_t>(i) * out_w];
            for (int o = 0; o < out_w; ++o) s += wrow[o] * dy.at(r, o);
            dx.at(r, i) += s;
          }
      }
      break;
    }
    case Op::ScaleRows:
      if (has_grad(n.in[0])) {
        Tensor& da = gref(n.in[0]);
        for (int r = 0; r < da.rows(); ++r)
          for (int c = 0; c < da.cols(); ++c)
            da.at(r, c) += n.aux[r] * dy.at(r, c);
      }
      break;
  }
}

}  // namespace comix::nn
