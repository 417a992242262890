#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "egorse/embeddings.hpp"
#include "egorse/linalg.hpp"

namespace egorse::subspace {

// Geometry of one reduced search space: the bounding hypercube B with
// half-widths b_i = sum_j |A_ij|, the pseudo-inverse used by both backward
// maps, and the largest eigenvalue of AA^T (the least-squares step size).
struct Subspace {
  embeddings::TransferMatrix transfer;
  linalg::Matrix pseudo_inverse;  // d x d_e
  std::vector<double> bounds;     // half-widths of B, one per reduced row
  double aat_lmax = 0.0;

  std::size_t d() const { return transfer.d; }
  std::size_t d_e() const { return transfer.d_e; }
};

Subspace compute_bounds(const embeddings::TransferMatrix& transfer);

struct MembershipResult {
  bool is_member = false;
  std::optional<std::vector<double>> certificate;  // present iff member
  double residual = 0.0;                           // achieved min ||Ax - u|| over the box
};

// Box-constrained least squares decides whether u has a preimage in the full
// box. Negative tol selects the default 1e-6 * sqrt(d_e).
MembershipResult membership(const Subspace& sub, const double* u, double tol = -1.0);
MembershipResult membership(const Subspace& sub, const std::vector<double>& u,
                            double tol = -1.0);

// Projection of [A]+u onto {Ax = u} intersected with the box, by Dykstra's
// alternating projections. Throws on a non-member u and on iteration-cap
// exhaustion (the message carries both residuals).
std::vector<double> gamma_b(const Subspace& sub, const double* u);
std::vector<double> gamma_b(const Subspace& sub, const std::vector<double>& u);

// Componentwise clamp of [A]+u: total on B, needs no membership.
std::vector<double> gamma_w(const Subspace& sub, const double* u);
std::vector<double> gamma_w(const Subspace& sub, const std::vector<double>& u);

double reduced_constraint(const Subspace& sub, const double* u);
double reduced_constraint(const Subspace& sub, const std::vector<double>& u);

// Everything the inner loop needs about one candidate, with membership and
// the backward map computed exactly once.
struct Candidate {
  MembershipResult membership;
  std::vector<double> mapped;  // gamma_b if member, gamma_w otherwise
  char used_map = '-';         // 'B' or 'W'
  double constraint = 0.0;
};
Candidate evaluate_candidate(const Subspace& sub, const double* u, double tol = -1.0);

struct ReducedEval {
  double value = 0.0;
  std::vector<double> full_point;
  char used_map = '-';
  bool non_finite = false;
};

// One expensive evaluation: f at the backward-mapped point.
ReducedEval reduced_objective(const Subspace& sub,
                              const std::function<double(const double*)>& f,
                              const double* u);

}  // namespace egorse::subspace
