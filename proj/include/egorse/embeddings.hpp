#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "egorse/doe.hpp"
#include "egorse/linalg.hpp"
#include "egorse/rng.hpp"

namespace egorse::embeddings {

// A transfer matrix maps the full design space to the reduced one: rows are
// the d_e reduced directions. seed records which stream built the matrix.
struct TransferMatrix {
  linalg::Matrix entries;  // d_e x d
  std::string method_tag;  // gaussian | hash | pls | mgp
  std::size_t d = 0;
  std::size_t d_e = 0;
  std::uint64_t seed = 0;
};

// Text format: header "d_e d method_tag seed", then d_e rows of d values at
// 17 significant digits; round-trips exactly.
void save_transfer_matrix(const TransferMatrix& tm, std::ostream& os);
void save_transfer_matrix(const TransferMatrix& tm, const std::string& path);
TransferMatrix load_transfer_matrix(std::istream& is);
TransferMatrix load_transfer_matrix(const std::string& path);

TransferMatrix gaussian_embedding(std::size_t d, std::size_t d_e, Rng& rng);
TransferMatrix hash_embedding(std::size_t d, std::size_t d_e, Rng& rng);

// Data-dependent failure of the PLS recursion; callers fall back to a
// gaussian embedding.
class PlsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Intermediate quantities of the NIPALS recursion, one column per extracted
// component: directions a', scores t, loadings p and c.
struct PlsState {
  linalg::Matrix residual_inputs;
  std::vector<double> residual_outputs;
  linalg::Matrix directions;  // d x k, unit columns
  linalg::Matrix scores;      // l x k, mutually orthogonal columns
  linalg::Matrix loadings_p;  // d x k
  std::vector<double> loadings_c;
};

// Supervised embedding from the archive. When a component beyond the first
// collapses (covariance below 1e-14), the matrix is truncated there and the
// remaining rows are filled with gaussian draws; *padded reports that. A
// collapse at the first component (constant outputs included) throws PlsError.
TransferMatrix pls_embedding(const Doe& doe, std::size_t d_e, Rng& rng,
                             PlsState* state = nullptr, bool* padded = nullptr);

struct MgpConfig {
  linalg::Matrix prior_mean;  // d_e x d; empty: PLS on the archive, else a prior draw
  double prior_sigma = 1.0;   // isotropic prior scale
  int map_iterations = 60;    // ascent steps per start
  double map_tolerance = 1e-3;
  int n_starts = 3;           // prior mean plus n_starts-1 prior draws
  int profile_every = 5;      // refit GP lengthscales every k accepted steps; 0 holds them fixed
  bool compute_posterior_covariance = false;
  double fd_step = 1e-5;
};

struct MgpResult {
  TransferMatrix map_matrix;
  std::optional<linalg::Matrix> posterior_covariance;  // (d*d_e) square, Laplace
  double gradient_norm_at_map = 0.0;
  double log_posterior = 0.0;
  bool used_prior_fallback = false;  // no start improved on the prior mean
};

MgpResult mgp_embedding(const Doe& doe, std::size_t d_e, const MgpConfig& config,
                        Rng& rng);

}  // namespace egorse::embeddings
