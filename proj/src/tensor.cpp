#include "comix/tensor.hpp"

#include <sstream>

#include "comix/errors.hpp"

namespace comix::nn {

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

void gemm_nn(const double* __restrict a, const double* __restrict b,
             double* __restrict c, int m, int k, int n) {
  // Rank-1 accumulation unrolled 4-wide over k to keep the FMA pipes busy.
  // Groups of all-zero A entries are skipped: selection matrices feed this
  // path with rows that are sparse by construction.
  for (int i = 0; i < m; ++i) {
    const double* __restrict arow = a + static_cast<size_t>(i) * k;
    double* __restrict crow = c + static_cast<size_t>(i) * n;
    int p = 0;
    for (; p + 4 <= k; p += 4) {
      const double a0 = arow[p], a1 = arow[p + 1], a2 = arow[p + 2], a3 = arow[p + 3];
      if (a0 == 0.0 && a1 == 0.0 && a2 == 0.0 && a3 == 0.0) continue;
      const double* __restrict b0 = b + static_cast<size_t>(p) * n;
      const double* __restrict b1 = b0 + n;
      const double* __restrict b2 = b1 + n;
      const double* __restrict b3 = b2 + n;
      for (int j = 0; j < n; ++j)
        crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
    }
    for (; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* __restrict brow = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(const double* __restrict a, const double* __restrict b,
             double* __restrict c, int m, int k, int n) {
  // C(MxN) += A(MxK) * B(NxK)^T. Four independent accumulators break the
  // FMA latency chain in the dot product.
  for (int i = 0; i < m; ++i) {
    const double* __restrict arow = a + static_cast<size_t>(i) * k;
    double* __restrict crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* __restrict brow = b + static_cast<size_t>(j) * k;
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      int p = 0;
      for (; p + 4 <= k; p += 4) {
        s0 += arow[p] * brow[p];
        s1 += arow[p + 1] * brow[p + 1];
        s2 += arow[p + 2] * brow[p + 2];
        s3 += arow[p + 3] * brow[p + 3];
      }
      double acc = (s0 + s1) + (s2 + s3);
      for (; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

void gemm_tn(const double* __restrict a, const double* __restrict b,
             double* __restrict c, int m, int k, int n) {
  // C(MxN) += A(KxM)^T * B(KxN), four K-rows per pass so each C row is
  // loaded and stored once per group.
  int p = 0;
  for (; p + 4 <= k; p += 4) {
    const double* __restrict a0 = a + static_cast<size_t>(p) * m;
    const double* __restrict a1 = a0 + m;
    const double* __restrict a2 = a1 + m;
    const double* __restrict a3 = a2 + m;
    const double* __restrict b0 = b + static_cast<size_t>(p) * n;
    const double* __restrict b1 = b0 + n;
    const double* __restrict b2 = b1 + n;
    const double* __restrict b3 = b2 + n;
    for (int i = 0; i < m; ++i) {
      const double v0 = a0[i], v1 = a1[i], v2 = a2[i], v3 = a3[i];
      if (v0 == 0.0 && v1 == 0.0 && v2 == 0.0 && v3 == 0.0) continue;
      double* __restrict crow = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j)
        crow[j] += v0 * b0[j] + v1 * b1[j] + v2 * b2[j] + v3 * b3[j];
    }
  }
  for (; p < k; ++p) {
    const double* __restrict arow = a + static_cast<size_t>(p) * m;
    const double* __restrict brow = b + static_cast<size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* __restrict crow = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}


namespace {
void shape_fail(const char* op, const Tensor& a, const Tensor& b, const Tensor& c) {
  throw ContractViolation(std::string(op) + ": incompatible shapes " + a.shape_str() +
                          ", " + b.shape_str() + " -> " + c.shape_str());
}
}  // namespace

void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c) {
  if (a.cols() != b.rows() || c.rows() != a.rows() || c.cols() != b.cols())
    shape_fail("gemm_nn", a, b, c);
  gemm_nn(a.v.data(), b.v.data(), c.v.data(), a.rows(), a.cols(), b.cols());
}

void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c) {
  if (a.cols() != b.cols() || c.rows() != a.rows() || c.cols() != b.rows())
    shape_fail("gemm_nt", a, b, c);
  gemm_nt(a.v.data(), b.v.data(), c.v.data(), a.rows(), a.cols(), b.rows());
}

void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c) {
  if (a.rows() != b.rows() || c.rows() != a.cols() || c.cols() != b.cols())
    shape_fail("gemm_tn", a, b, c);
  gemm_tn(a.v.data(), b.v.data(), c.v.data(), a.cols(), a.rows(), b.cols());
}

}  // namespace comix::nn
