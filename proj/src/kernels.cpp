#include "chanflow/kernels.hpp"

#include <string>

#include "chanflow/errors.hpp"

namespace chanflow {

namespace {

void check(bool ok, const char* what) {
  if (!ok) throw DataError(std::string("kernel shape mismatch: ") + what);
}

}  // namespace

void affine_forward(const Matrix& W, const std::vector<double>& b, const Matrix& A, Matrix& C,
                    bool parallel) {
  check(W.cols == A.rows && static_cast<int>(b.size()) == W.rows, "affine_forward");
  C.rows = W.rows;
  C.cols = A.cols;
  C.a.assign(static_cast<size_t>(C.rows) * C.cols, 0.0);
  const int m = W.rows, k = W.cols, n = A.cols;
#pragma omp parallel for schedule(static) if (parallel)
  for (int i = 0; i < m; ++i) {
    double* ci = C.row(i);
    for (int j = 0; j < n; ++j) ci[j] = b[i];
    const double* wi = W.row(i);
    for (int l = 0; l < k; ++l) {
      const double w = wi[l];
      const double* al = A.row(l);
      for (int j = 0; j < n; ++j) ci[j] += w * al[j];
    }
  }
}

void affine_forward_ref(const Matrix& W, const std::vector<double>& b, const Matrix& A,
                        Matrix& C) {
  check(W.cols == A.rows && static_cast<int>(b.size()) == W.rows, "affine_forward_ref");
  C.rows = W.rows;
  C.cols = A.cols;
  C.a.assign(static_cast<size_t>(C.rows) * C.cols, 0.0);
  for (int i = 0; i < W.rows; ++i) {
    for (int j = 0; j < A.cols; ++j) {
      double acc = b[i];
      for (int l = 0; l < W.cols; ++l) acc += W.at(i, l) * A.at(l, j);
      C.at(i, j) = acc;
    }
  }
}

void gemm_nt(const Matrix& D, const Matrix& A, Matrix& C, bool parallel) {
  check(D.cols == A.cols, "gemm_nt");
  C.rows = D.rows;
  C.cols = A.rows;
  C.a.assign(static_cast<size_t>(C.rows) * C.cols, 0.0);
  const int m = D.rows, k = A.rows, n = D.cols;
#pragma omp parallel for schedule(static) if (parallel)
  for (int i = 0; i < m; ++i) {
    const double* di = D.row(i);
    double* ci = C.row(i);
    for (int j = 0; j < k; ++j) {
      const double* aj = A.row(j);
      double acc = 0.0;
      for (int l = 0; l < n; ++l) acc += di[l] * aj[l];
      ci[j] = acc;
    }
  }
}

void gemm_nt_ref(const Matrix& D, const Matrix& A, Matrix& C) {
  check(D.cols == A.cols, "gemm_nt_ref");
  C.rows = D.rows;
  C.cols = A.rows;
  C.a.assign(static_cast<size_t>(C.rows) * C.cols, 0.0);
  for (int i = 0; i < D.rows; ++i) {
    for (int j = 0; j < A.rows; ++j) {
      double acc = 0.0;
      for (int l = 0; l < D.cols; ++l) acc += D.at(i, l) * A.at(j, l);
      C.at(i, j) = acc;
    }
  }
}

void gemm_tn(const Matrix& W, const Matrix& D, Matrix& C, bool parallel) {
  check(W.rows == D.rows, "gemm_tn");
  C.rows = W.cols;
  C.cols = D.cols;
  C.a.assign(static_cast<size_t>(C.rows) * C.cols, 0.0);
  const int m = W.cols, k = W.rows, n = D.cols;
#pragma omp parallel for schedule(static) if (parallel)
  for (int i = 0; i < m; ++i) {
    double* ci = C.row(i);
    for (int l = 0; l < k; ++l) {
      const double w = W.at(l, i);
      const double* dl = D.row(l);
      for (int j = 0; j < n; ++j) ci[j] += w * dl[j];
    }
  }
}

void gemm_tn_ref(const Matrix& W, const Matrix& D, Matrix& C) {
  check(W.rows == D.rows, "gemm_tn_ref");
  C.rows = W.cols;
  C.cols = D.cols;
  C.a.assign(static_cast<size_t>(C.rows) * C.cols, 0.0);
  for (int i = 0; i < W.cols; ++i) {
    for (int j = 0; j < D.cols; ++j) {
      double acc = 0.0;
      for (int l = 0; l < W.rows; ++l) acc += W.at(l, i) * D.at(l, j);
      C.at(i, j) = acc;
    }
  }
}

}  // namespace chanflow
