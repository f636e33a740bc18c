#pragma once

#include <vector>

namespace chanflow {

// Dense row-major matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double& at(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }
  double* row(int i) { return a.data() + static_cast<size_t>(i) * cols; }
  const double* row(int i) const { return a.data() + static_cast<size_t>(i) * cols; }
};

// All kernels accumulate over the contraction index in ascending order, so the
// OpenMP variants are bitwise identical to their serial references for any
// thread count (rows are independent).

// C = W * A + b 1^T             (W: m x k, A: k x n, b: m, C: m x n)
void affine_forward(const Matrix& W, const std::vector<double>& b, const Matrix& A, Matrix& C,
                    bool parallel);
void affine_forward_ref(const Matrix& W, const std::vector<double>& b, const Matrix& A,
                        Matrix& C);

// C = D * A^T                   (D: m x n, A: k x n, C: m x k)
void gemm_nt(const Matrix& D, const Matrix& A, Matrix& C, bool parallel);
void gemm_nt_ref(const Matrix& D, const Matrix& A, Matrix& C);

// C = W^T * D                   (W: m x k, D: m x n, C: k x n)
void gemm_tn(const Matrix& W, const Matrix& D, Matrix& C, bool parallel);
void gemm_tn_ref(const Matrix& W, const Matrix& D, Matrix& C);

}  // namespace chanflow
