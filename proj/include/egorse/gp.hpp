#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "egorse/doe.hpp"
#include "egorse/linalg.hpp"
#include "egorse/rng.hpp"

namespace egorse::gp {

// Anisotropic squared-exponential kernel,
//   k(x, x') = variance * exp(-1/2 * sum_j (x_j - x'_j)^2 / theta_j^2),
// with a constant prior mean estimated by generalized least squares.

struct GpConfig {
  int n_starts = 10;
  double theta_min = 1e-3;
  double theta_max = 1e3;
  double nugget_rel = 1e-8;      // relative to kernel_variance
  double nugget_rel_max = 1e-4;  // escalation ceiling at final factorization
  int max_evals_per_start = 0;   // 0: 30*dim + 30 likelihood evaluations
};

struct GpModel {
  std::vector<double> kernel_lengthscales;
  double kernel_variance = 0.0;
  double nugget = 0.0;  // absolute jitter added to the diagonal of K
  double prior_mean_value = 0.0;
  Doe training_doe;
  linalg::Matrix chol_factor;  // lower factor of K + nugget*I
  std::vector<double> alpha;   // (K + nugget*I)^{-1} (Y - prior_mean)
};

struct GpHyperparams {
  std::vector<double> lengthscales;
  double variance = 1.0;
  double nugget = 0.0;  // absolute
  double mean = 0.0;
};

struct Prediction {
  double mean = 0.0;
  double std = 0.0;
};

struct GpGradient {
  std::vector<double> mean;
  std::vector<double> std;
  bool degenerate = false;  // std was zero; grad_std reported as zeros
};

// Per-start record of the hyperparameter search, enough to audit that the
// returned model dominates every candidate the search evaluated.
struct FitDiagnostics {
  std::vector<std::vector<double>> seed_thetas;
  std::vector<double> seed_lmls;
  double best_lml = 0.0;
};

class GpFitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

GpModel fit_gp(const Doe& doe, const GpConfig& config, Rng& rng,
               FitDiagnostics* diagnostics = nullptr);

double log_marginal_likelihood(const GpHyperparams& hp, const Doe& doe);

// Concentrated likelihood at fixed lengthscales: the variance and constant
// mean that maximize it are closed-form and returned alongside the value,
// which is -inf when the correlation matrix fails to factor.
struct ProfiledLml {
  double value = 0.0;
  double variance = 0.0;
  double mean = 0.0;
};
ProfiledLml profiled_lml(const Doe& doe, const std::vector<double>& theta,
                         double nugget_rel);

Prediction predict(const GpModel& model, const double* u);
Prediction predict(const GpModel& model, const std::vector<double>& u);
GpGradient predict_gradient(const GpModel& model, const double* u);
GpGradient predict_gradient(const GpModel& model, const std::vector<double>& u);

// Process-wide instrumentation over every fit_gp call.
struct GpFitStats {
  std::uint64_t fit_count = 0;
  std::size_t max_input_dim = 0;
};
GpFitStats gp_fit_stats();
void reset_gp_fit_stats();

}  // namespace egorse::gp
