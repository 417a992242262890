#include "egorse/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>

namespace egorse::subspace {
namespace {

double clamp1(double v) { return v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v); }

// ||A x - u||_2 into r (r gets the residual vector).
double residual_norm(const linalg::Matrix& a, const double* x, const double* u,
                     std::vector<double>& r) {
  linalg::matvec(a, x, r.data());
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] -= u[i];
    s += r[i] * r[i];
  }
  return std::sqrt(s);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

Subspace compute_bounds(const embeddings::TransferMatrix& transfer) {
  const std::size_t de = transfer.d_e;
  const std::size_t d = transfer.d;
  const linalg::Matrix& a = transfer.entries;
  if (de == 0 || d == 0 || a.rows() != de || a.cols() != d) {
    throw std::invalid_argument("compute_bounds: transfer matrix shape mismatch");
  }

  Subspace sub;
  sub.transfer = transfer;
  sub.bounds.assign(de, 0.0);
  for (std::size_t i = 0; i < de; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double v = a(i, j);
      if (!std::isfinite(v)) {
        throw std::invalid_argument("compute_bounds: non-finite transfer entry");
      }
      s += std::fabs(v);
    }
    sub.bounds[i] = s;
  }

  linalg::Matrix aat = linalg::matmul(a, linalg::transpose(a));
  linalg::SymEig eig = linalg::sym_eigen(aat);
  sub.aat_lmax = eig.values[de - 1];

  linalg::Matrix chol = aat;
  if (!linalg::cholesky(chol) ||
      eig.values[0] <= 1e-12 * std::max(sub.aat_lmax, 1.0)) {
    // The eigenvector of the smallest eigenvalue names the row combination
    // that collapses.
    std::string msg =
        "compute_bounds: transfer rows are linearly dependent; combination";
    for (std::size_t i = 0; i < de; ++i) {
      msg += (i == 0 ? " " : " + ");
      msg += fmt(eig.vectors(i, 0)) + "*row" + std::to_string(i);
    }
    msg += " is null (smallest eigenvalue of AA^T is " + fmt(eig.values[0]) + ")";
    throw std::runtime_error(msg);
  }

  sub.pseudo_inverse = linalg::matmul(linalg::transpose(a), linalg::spd_inverse(aat));
  return sub;
}

MembershipResult membership(const Subspace& sub, const double* u, double tol) {
  const std::size_t d = sub.d();
  const std::size_t de = sub.d_e();
  const linalg::Matrix& a = sub.transfer.entries;
  if (tol < 0.0) tol = 1e-6 * std::sqrt(static_cast<double>(de));

  // FISTA on min ||Ax - u||^2 over the box; the gradient Lipschitz constant
  // is 2*lmax(A A^T).
  const double step = 1.0 / (2.0 * std::max(sub.aat_lmax, 1e-300));

  std::vector<double> x(d), xp(d), y(d), grad(d), r(de);
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < de; ++k) s += sub.pseudo_inverse(j, k) * u[k];
    x[j] = clamp1(s);
  }
  y = x;
  xp = x;

  double t = 1.0;
  double best_res = residual_norm(a, x.data(), u, r);
  std::vector<double> best_x = x;

  const std::size_t max_iter = 2000;
  for (std::size_t iter = 0; iter < max_iter && best_res > 0.1 * tol; ++iter) {
    residual_norm(a, y.data(), u, r);
    linalg::matvec_t(a, r.data(), grad.data());
    double move = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double xn = clamp1(y[j] - 2.0 * step * grad[j]);
      move = std::max(move, std::fabs(xn - x[j]));
      xp[j] = x[j];
      x[j] = xn;
    }
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / tn;
    for (std::size_t j = 0; j < d; ++j) y[j] = x[j] + beta * (x[j] - xp[j]);
    t = tn;

    const double res = residual_norm(a, x.data(), u, r);
    if (res < best_res) {
      best_res = res;
      best_x = x;
    }
    if (best_res <= 0.1 * tol) break;
    if (move < 1e-12) break;
  }

  MembershipResult out;
  out.residual = best_res;
  out.is_member = best_res <= tol;
  if (out.is_member) out.certificate = std::move(best_x);
  return out;
}

MembershipResult membership(const Subspace& sub, const std::vector<double>& u,
                            double tol) {
  if (u.size() != sub.d_e()) {
    throw std::invalid_argument("membership: u has wrong dimension");
  }
  return membership(sub, u.data(), tol);
}

namespace {

std::vector<double> gamma_b_unchecked(const Subspace& sub, const double* u) {
  const std::size_t d = sub.d();
  const std::size_t de = sub.d_e();
  const linalg::Matrix& a = sub.transfer.entries;

  std::vector<double> x(d);
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < de; ++k) s += sub.pseudo_inverse(j, k) * u[k];
    x[j] = s;
  }

  // Dykstra between the box (with correction, ending each cycle clamped so
  // the returned point is box-feasible exactly) and the affine set {Ax = u}
  // (linear projection, no correction needed).
  std::vector<double> p(d, 0.0), yb(d), prev(d), r(de);
  prev = x;
  const std::size_t cap = 10000;
  double aff_res = 0.0;
  double box_viol = 0.0;
  for (std::size_t iter = 0; iter < cap; ++iter) {
    box_viol = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double z = x[j] + p[j];
      yb[j] = clamp1(z);
      p[j] = z - yb[j];
      box_viol = std::max(box_viol, std::fabs(p[j]));
    }
    aff_res = residual_norm(a, yb.data(), u, r);
    double move = 0.0;
    for (std::size_t j = 0; j < d; ++j) move = std::max(move, std::fabs(yb[j] - prev[j]));
    prev = yb;
    if (move < 1e-10 && aff_res < 1e-8) return yb;

    // project the clamped iterate back onto {Ax = u}
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < de; ++k) s += sub.pseudo_inverse(j, k) * r[k];
      x[j] = yb[j] - s;
    }
  }
  throw std::runtime_error(
      "gamma_b: Dykstra did not converge in 10000 iterations (affine residual " +
      fmt(aff_res) + ", box violation " + fmt(box_viol) + ")");
}

}  // namespace

std::vector<double> gamma_b(const Subspace& sub, const double* u) {
  MembershipResult m = membership(sub, u);
  if (!m.is_member) {
    throw std::invalid_argument(
        "gamma_b: u is not a member of the feasible image (residual " +
        fmt(m.residual) + ")");
  }
  return gamma_b_unchecked(sub, u);
}

std::vector<double> gamma_b(const Subspace& sub, const std::vector<double>& u) {
  if (u.size() != sub.d_e()) {
    throw std::invalid_argument("gamma_b: u has wrong dimension");
  }
  return gamma_b(sub, u.data());
}

std::vector<double> gamma_w(const Subspace& sub, const double* u) {
  const std::size_t d = sub.d();
  const std::size_t de = sub.d_e();
  std::vector<double> x(d);
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < de; ++k) s += sub.pseudo_inverse(j, k) * u[k];
    x[j] = clamp1(s);
  }
  return x;
}

std::vector<double> gamma_w(const Subspace& sub, const std::vector<double>& u) {
  if (u.size() != sub.d_e()) {
    throw std::invalid_argument("gamma_w: u has wrong dimension");
  }
  return gamma_w(sub, u.data());
}

Candidate evaluate_candidate(const Subspace& sub, const double* u, double tol) {
  Candidate c;
  c.membership = membership(sub, u, tol);
  if (c.membership.is_member) {
    c.mapped = gamma_b_unchecked(sub, u);
    c.used_map = 'B';
    double nsq = 0.0;
    for (double v : c.mapped) nsq += v * v;
    c.constraint = 1.0 - nsq / static_cast<double>(sub.d());
  } else {
    c.mapped = gamma_w(sub, u);
    c.used_map = 'W';
    // Scaled-coordinate penalty; its range reaches -d_e, not -1, and is kept
    // as-is because g only ever gates on the sign.
    double nsq = 0.0;
    for (std::size_t i = 0; i < sub.d_e(); ++i) {
      const double ua = u[i] / sub.bounds[i];
      nsq += ua * ua;
    }
    c.constraint = -nsq;
  }
  return c;
}

double reduced_constraint(const Subspace& sub, const double* u) {
  return evaluate_candidate(sub, u).constraint;
}

double reduced_constraint(const Subspace& sub, const std::vector<double>& u) {
  if (u.size() != sub.d_e()) {
    throw std::invalid_argument("reduced_constraint: u has wrong dimension");
  }
  return reduced_constraint(sub, u.data());
}

ReducedEval reduced_objective(const Subspace& sub,
                              const std::function<double(const double*)>& f,
                              const double* u) {
  Candidate c = evaluate_candidate(sub, u);
  ReducedEval out;
  out.full_point = std::move(c.mapped);
  out.used_map = c.used_map;
  out.value = f(out.full_point.data());
  out.non_finite = !std::isfinite(out.value);
  return out;
}

}  // namespace egorse::subspace
