#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "comix/errors.hpp"

namespace comix::nn {

// Dense real array, rank 1 or 2, row-major. Rank-1 vectors behave as a
// single row for the matrix ops.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;

  Tensor() = default;

  static Tensor zeros(int rows, int cols) {
    Tensor t;
    t.shape = {rows, cols};
    t.v.assign(static_cast<size_t>(rows) * cols, 0.0);
    return t;
  }
  static Tensor row(std::vector<double> values) {
    Tensor t;
    t.shape = {1, static_cast<int>(values.size())};
    t.v = std::move(values);
    return t;
  }
  static Tensor full(int rows, int cols, double value) {
    Tensor t = zeros(rows, cols);
    for (double& x : t.v) x = value;
    return t;
  }
  static Tensor scalar(double value) { return row({value}); }

  int rows() const { return shape.size() == 2 ? shape[0] : 1; }
  int cols() const { return shape.empty() ? 0 : shape.back(); }
  int size() const { return static_cast<int>(v.size()); }
  bool empty() const { return v.empty(); }

  double& at(int r, int c) { return v[static_cast<size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return v[static_cast<size_t>(r) * cols() + c]; }
  double item() const {
    if (size() != 1) throw ContractViolation("Tensor::item on non-scalar");
    return v[0];
  }

  bool same_shape(const Tensor& o) const {
    return rows() == o.rows() && cols() == o.cols();
  }
  bool all_finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }
  void fill(double x) {
    for (double& a : v) a = x;
  }
  std::string shape_str() const;
};

// Accumulating matrix kernels. These are the only hot loops in the engine.
//   gemm_nn: C += A(MxK) * B(KxN)
//   gemm_nt: C += A(MxK) * B(NxK)^T
//   gemm_tn: C += A(KxM)^T * B(KxN)
void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n);
void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n);
void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n);

// Shape-checked wrappers over the raw kernels.
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c);
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c);
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c);

}  // namespace comix::nn
