#pragma once

#include <cstddef>
#include <vector>

// Compact dense linear algebra on row-major storage. Rows are contiguous so
// they feed the simd kernels directly; everything here is sized for the
// shapes this project actually hits (Cholesky up to ~1e3, tiny d_e-square
// solves, d_e x d transfer-matrix products).

namespace egorse::linalg {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* row(std::size_t i) { return data_.data() + i * cols_; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

Matrix transpose(const Matrix& a);
Matrix matmul(const Matrix& a, const Matrix& b);
void matvec(const Matrix& a, const double* x, double* out);    // out = A x
void matvec_t(const Matrix& a, const double* x, double* out);  // out = A^T x

// In-place lower Cholesky A = L L^T; the strict upper triangle is left
// untouched. Returns false on a non-positive pivot.
bool cholesky(Matrix& a);
void solve_lower(const Matrix& l, double* b);    // L y = b, forward
void solve_lower_t(const Matrix& l, double* b);  // L^T x = b, backward
double log_det_chol(const Matrix& l);            // log det(L L^T)
Matrix spd_inverse(Matrix a);                     // throws on non-SPD input

// Gauss-Jordan with partial pivoting, meant for d_e x d_e systems.
Matrix small_inverse(Matrix a);                   // throws on singular input

// Cyclic Jacobi for symmetric matrices. values ascending; vectors stored as
// columns of the returned matrix (A = V diag(values) V^T).
struct SymEig {
  std::vector<double> values;
  Matrix vectors;
};
SymEig sym_eigen(Matrix a);

}  // namespace egorse::linalg
