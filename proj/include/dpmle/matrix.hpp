#ifndef DPMLE_MATRIX_HPP
#define DPMLE_MATRIX_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "dpmle/errors.hpp"

namespace dpmle {

// Small dense row-major matrix. State counts here are tiny (N <= 8), so a
// flat vector with hand-rolled solves beats pulling in a linalg dependency.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Solves A x = b by Gaussian elimination with partial pivoting, followed by
// one step of iterative refinement. A is n x n, n small.
inline std::vector<double> solve_linear(const Matrix& a, const std::vector<double>& b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.size() != n)
    throw dimension_error("solve_linear: incompatible shapes");

  Matrix lu = a;
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::fabs(lu(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::fabs(lu(i, k)) > best) { best = std::fabs(lu(i, k)); piv = i; }
    }
    if (best < 1e-13)
      throw singularity_error("solve_linear: matrix is singular to working precision");
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu(k, j), lu(piv, j));
      std::swap(perm[k], perm[piv]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      lu(i, k) /= lu(k, k);
      for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= lu(i, k) * lu(k, j);
    }
  }

  auto lu_solve = [&](const std::vector<double>& rhs) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = rhs[perm[i]];
    for (std::size_t i = 1; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) x[i] -= lu(i, j) * x[j];
    for (std::size_t i = n; i-- > 0;) {
      for (std::size_t j = i + 1; j < n; ++j) x[i] -= lu(i, j) * x[j];
      x[i] /= lu(i, i);
    }
    return x;
  };

  std::vector<double> x = lu_solve(b);
  // one refinement pass tightens the residual to ~1e-15
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t j = 0; j < n; ++j) s -= a(i, j) * x[j];
    r[i] = s;
  }
  std::vector<double> dx = lu_solve(r);
  for (std::size_t i = 0; i < n; ++i) x[i] += dx[i];
  return x;
}

}  // namespace dpmle

#endif
