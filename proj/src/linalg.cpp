#include "egorse/linalg.hpp"

#include <cmath>
#include <stdexcept>

#include "egorse/simd/kernels.hpp"

namespace egorse::linalg {

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: shape mismatch");
  Matrix c(a.rows(), b.cols(), 0.0);
  // i-k-j order keeps the inner update on contiguous rows of b and c.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      simd::axpy(a(i, k), b.row(k), c.row(i), b.cols());
    }
  }
  return c;
}

void matvec(const Matrix& a, const double* x, double* out) {
  for (std::size_t i = 0; i < a.rows(); ++i) out[i] = simd::dot(a.row(i), x, a.cols());
}

void matvec_t(const Matrix& a, const double* x, double* out) {
  for (std::size_t j = 0; j < a.cols(); ++j) out[j] = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) simd::axpy(x[i], a.row(i), out, a.cols());
}

bool cholesky(Matrix& a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw std::invalid_argument("cholesky: matrix not square");
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j) - simd::dot(a.row(j), a.row(j), j);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    d = std::sqrt(d);
    a(j, j) = d;
    const double inv = 1.0 / d;
    for (std::size_t i = j + 1; i < n; ++i) {
      a(i, j) = (a(i, j) - simd::dot(a.row(i), a.row(j), j)) * inv;
    }
  }
  return true;
}

void solve_lower(const Matrix& l, double* b) {
  const std::size_t n = l.rows();
  for (std::size_t i = 0; i < n; ++i) {
    b[i] = (b[i] - simd::dot(l.row(i), b, i)) / l(i, i);
  }
}

void solve_lower_t(const Matrix& l, double* b) {
  const std::size_t n = l.rows();
  for (std::size_t ii = n; ii-- > 0;) {
    double acc = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) acc -= l(k, ii) * b[k];
    b[ii] = acc / l(ii, ii);
  }
}

double log_det_chol(const Matrix& l) {
  double acc = 0.0;
  for (std::size_t i = 0; i < l.rows(); ++i) acc += std::log(l(i, i));
  return 2.0 * acc;
}

Matrix spd_inverse(Matrix a) {
  const std::size_t n = a.rows();
  if (!cholesky(a)) throw std::runtime_error("spd_inverse: matrix not positive definite");
  Matrix inv(n, n, 0.0);
  std::vector<double> e(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) e[i] = (i == j) ? 1.0 : 0.0;
    solve_lower(a, e.data());
    solve_lower_t(a, e.data());
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = e[i];
  }
  return inv;
}

Matrix small_inverse(Matrix a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw std::invalid_argument("small_inverse: matrix not square");
  Matrix inv(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) inv(i, i) = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t i = col + 1; i < n; ++i) {
      if (std::fabs(a(i, col)) > std::fabs(a(piv, col))) piv = i;
    }
    if (std::fabs(a(piv, col)) < 1e-300) throw std::runtime_error("small_inverse: singular matrix");
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(a(piv, j), a(col, j));
        std::swap(inv(piv, j), inv(col, j));
      }
    }
    const double d = 1.0 / a(col, col);
    for (std::size_t j = 0; j < n; ++j) {
      a(col, j) *= d;
      inv(col, j) *= d;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (i == col) continue;
      const double f = a(i, col);
      if (f == 0.0) continue;
      simd::axpy(-f, a.row(col), a.row(i), n);
      simd::axpy(-f, inv.row(col), inv.row(i), n);
    }
  }
  return inv;
}

SymEig sym_eigen(Matrix a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw std::invalid_argument("sym_eigen: matrix not square");
  Matrix v(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  double frob = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) frob += a(i, j) * a(i, j);
  frob = std::sqrt(frob);
  const double tol = (frob > 0.0 ? frob : 1.0) * 1e-15;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(2.0 * off) <= tol) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::fabs(a(p, q)) <= tol * 1e-2) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  SymEig out;
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = a(i, i);
  // selection sort ascending, permuting vector columns alongside
  out.vectors = v;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t m = i;
    for (std::size_t j = i + 1; j < n; ++j)
      if (out.values[j] < out.values[m]) m = j;
    if (m != i) {
      std::swap(out.values[i], out.values[m]);
      for (std::size_t k = 0; k < n; ++k) std::swap(out.vectors(k, i), out.vectors(k, m));
    }
  }
  return out;
}

}  // namespace egorse::linalg
