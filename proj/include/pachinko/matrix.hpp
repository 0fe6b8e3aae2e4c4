#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pachinko {

// Dense row-major matrix of doubles. Vectors are 1 x n matrices.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {
    if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative shape");
  }

  double& operator()(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

  double* row_ptr(int i) { return data.data() + static_cast<size_t>(i) * cols; }
  const double* row_ptr(int i) const { return data.data() + static_cast<size_t>(i) * cols; }

  size_t size() const { return data.size(); }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  bool operator==(const Matrix& o) const { return rows == o.rows && cols == o.cols && data == o.data; }
};

inline void require_shape(const Matrix& m, int r, int c, const std::string& what) {
  if (m.rows != r || m.cols != c)
    throw std::invalid_argument("dimension error in " + what + ": expected " + std::to_string(r) + "x" +
                                std::to_string(c) + ", got " + std::to_string(m.rows) + "x" +
                                std::to_string(m.cols));
}

inline bool all_finite(const Matrix& m) {
  for (double v : m.data)
    if (!std::isfinite(v)) return false;
  return true;
}

// c = a * b
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dimension mismatch");
  Matrix c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* ai = a.row_ptr(i);
    double* ci = c.row_ptr(i);
    for (int k = 0; k < a.cols; ++k) {
      double aik = ai[k];
      if (aik == 0.0) continue;
      const double* bk = b.row_ptr(k);
      for (int j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

// c = a * b^T
inline Matrix matmul_bt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) throw std::invalid_argument("matmul_bt: inner dimension mismatch");
  Matrix c(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    const double* ai = a.row_ptr(i);
    for (int j = 0; j < b.rows; ++j) {
      const double* bj = b.row_ptr(j);
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += ai[k] * bj[k];
      c(i, j) = s;
    }
  }
  return c;
}

// c = a^T * b
inline Matrix matmul_at(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows) throw std::invalid_argument("matmul_at: inner dimension mismatch");
  Matrix c(a.cols, b.cols);
  for (int k = 0; k < a.rows; ++k) {
    const double* ak = a.row_ptr(k);
    const double* bk = b.row_ptr(k);
    for (int i = 0; i < a.cols; ++i) {
      double aki = ak[i];
      if (aki == 0.0) continue;
      double* ci = c.row_ptr(i);
      for (int j = 0; j < b.cols; ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

inline void axpy(double alpha, const Matrix& x, Matrix& y) {
  if (!x.same_shape(y)) throw std::invalid_argument("axpy: shape mismatch");
  for (size_t i = 0; i < x.size(); ++i) y.data[i] += alpha * x.data[i];
}

}  // namespace pachinko
