#include "egorse/gp.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "egorse/sampling.hpp"
#include "egorse/simd/kernels.hpp"

namespace egorse::gp {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::atomic<std::uint64_t> g_fit_count{0};
std::atomic<std::size_t> g_max_input_dim{0};

void note_fit(std::size_t dim) {
  g_fit_count.fetch_add(1, std::memory_order_relaxed);
  std::size_t cur = g_max_input_dim.load(std::memory_order_relaxed);
  while (cur < dim &&
         !g_max_input_dim.compare_exchange_weak(cur, dim, std::memory_order_relaxed)) {
  }
}

void inv_theta_sq(const std::vector<double>& theta, std::vector<double>& w) {
  w.resize(theta.size());
  for (std::size_t j = 0; j < theta.size(); ++j) w[j] = 1.0 / (theta[j] * theta[j]);
}

// Lower triangle of the correlation matrix, unit diagonal plus jitter.
void build_correlation(const Doe& doe, const std::vector<double>& w,
                       double nugget_rel, linalg::Matrix& c) {
  const std::size_t l = doe.size(), d = doe.dim();
  for (std::size_t i = 0; i < l; ++i) {
    const double* xi = doe.point(i);
    for (std::size_t k = 0; k < i; ++k) {
      c(i, k) = std::exp(-0.5 * simd::weighted_sqdist(xi, doe.point(k), w.data(), d));
    }
    c(i, i) = 1.0 + nugget_rel;
  }
}

struct Profile {
  double lml = kNegInf;
  double sigma2 = 0.0;
  double mu = 0.0;
  bool ok = false;
};

Profile profile_at(const Doe& doe, const std::vector<double>& theta,
                   double nugget_rel, linalg::Matrix& scratch,
                   std::vector<double>& w) {
  Profile p;
  const std::size_t l = doe.size();
  inv_theta_sq(theta, w);
  build_correlation(doe, w, nugget_rel, scratch);
  if (!linalg::cholesky(scratch)) return p;

  std::vector<double> z = doe.outputs();
  linalg::solve_lower(scratch, z.data());
  std::vector<double> ones(l, 1.0);
  linalg::solve_lower(scratch, ones.data());

  const double wtw = simd::dot(ones.data(), ones.data(), l);
  const double mu = simd::dot(ones.data(), z.data(), l) / wtw;
  simd::axpy(-mu, ones.data(), z.data(), l);  // z becomes the GLS residual
  const double raw = simd::dot(z.data(), z.data(), l) / static_cast<double>(l);

  double y2 = 0.0;
  for (double y : doe.outputs()) y2 += y * y;
  const double floor = 1e-15 * std::max(1.0, y2 / static_cast<double>(l));
  const double sigma2 = std::max(raw, floor);

  const double ld = static_cast<double>(l);
  p.lml = -0.5 * (ld * raw / sigma2 + ld * std::log(sigma2) +
                  linalg::log_det_chol(scratch) + ld * kLog2Pi);
  p.sigma2 = sigma2;
  p.mu = mu;
  p.ok = true;
  return p;
}

// Tracks the best candidate over every likelihood evaluation the search makes.
struct BestTracker {
  std::vector<double> theta;
  Profile profile;
  void offer(const std::vector<double>& t, const Profile& p) {
    if (p.ok && (!profile.ok || p.lml > profile.lml)) {
      theta = t;
      profile = p;
    }
  }
};

// Nelder-Mead minimization with the standard coefficients; eval is charged
// for every objective call including the initial simplex.
template <typename F>
void nelder_mead(F&& eval, const std::vector<double>& x0, double step,
                 int max_evals) {
  const std::size_t n = x0.size();
  int used = 0;
  auto budget = [&]() { return used < max_evals; };

  std::vector<std::vector<double>> xs(n + 1, x0);
  std::vector<double> fs(n + 1);
  for (std::size_t i = 1; i <= n; ++i) xs[i][i - 1] += step;
  for (std::size_t i = 0; i <= n && budget(); ++i) {
    fs[i] = eval(xs[i]);
    ++used;
  }

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  while (budget()) {
    for (std::size_t i = 0; i <= n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
    const std::size_t best = order[0], worst = order[n], second = order[n - 1];
    if (fs[worst] - fs[best] < 1e-9 * (1.0 + std::fabs(fs[best]))) break;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (order[i] == worst) continue;
      for (std::size_t j = 0; j < n; ++j) centroid[j] += xs[order[i]][j];
    }
    for (double& cj : centroid) cj /= static_cast<double>(n);

    for (std::size_t j = 0; j < n; ++j) xr[j] = 2.0 * centroid[j] - xs[worst][j];
    const double fr = eval(xr);
    ++used;
    if (fr < fs[best]) {
      if (!budget()) { xs[worst] = xr; fs[worst] = fr; break; }
      for (std::size_t j = 0; j < n; ++j) xe[j] = centroid[j] + 2.0 * (xr[j] - centroid[j]);
      const double fe = eval(xe);
      ++used;
      if (fe < fr) { xs[worst] = xe; fs[worst] = fe; }
      else { xs[worst] = xr; fs[worst] = fr; }
      continue;
    }
    if (fr < fs[second]) { xs[worst] = xr; fs[worst] = fr; continue; }
    if (!budget()) break;
    const bool outside = fr < fs[worst];
    if (outside) {
      for (std::size_t j = 0; j < n; ++j) xc[j] = centroid[j] + 0.5 * (xr[j] - centroid[j]);
    } else {
      for (std::size_t j = 0; j < n; ++j) xc[j] = centroid[j] + 0.5 * (xs[worst][j] - centroid[j]);
    }
    const double fc = eval(xc);
    ++used;
    if (fc < (outside ? fr : fs[worst])) { xs[worst] = xc; fs[worst] = fc; continue; }
    // shrink toward the best vertex
    for (std::size_t i = 0; i <= n && budget(); ++i) {
      if (i == best) continue;
      for (std::size_t j = 0; j < n; ++j)
        xs[i][j] = xs[best][j] + 0.5 * (xs[i][j] - xs[best][j]);
      fs[i] = eval(xs[i]);
      ++used;
    }
  }
}

}  // namespace

ProfiledLml profiled_lml(const Doe& doe, const std::vector<double>& theta,
                         double nugget_rel) {
  if (theta.size() != doe.dim())
    throw std::invalid_argument("profiled_lml: lengthscale dimension mismatch");
  linalg::Matrix scratch(doe.size(), doe.size());
  std::vector<double> w;
  Profile p = profile_at(doe, theta, nugget_rel, scratch, w);
  return {p.ok ? p.lml : kNegInf, p.sigma2, p.mu};
}

double log_marginal_likelihood(const GpHyperparams& hp, const Doe& doe) {
  const std::size_t l = doe.size(), d = doe.dim();
  if (hp.lengthscales.size() != d)
    throw std::invalid_argument("log_marginal_likelihood: lengthscale dimension mismatch");
  if (!(hp.variance > 0.0) || hp.nugget < 0.0)
    throw std::invalid_argument("log_marginal_likelihood: hyperparameters must be positive");
  for (double t : hp.lengthscales)
    if (!(t > 0.0))
      throw std::invalid_argument("log_marginal_likelihood: hyperparameters must be positive");

  std::vector<double> w;
  inv_theta_sq(hp.lengthscales, w);
  linalg::Matrix k(l, l);
  for (std::size_t i = 0; i < l; ++i) {
    const double* xi = doe.point(i);
    for (std::size_t j = 0; j < i; ++j) {
      k(i, j) = hp.variance *
                std::exp(-0.5 * simd::weighted_sqdist(xi, doe.point(j), w.data(), d));
    }
    k(i, i) = hp.variance + hp.nugget;
  }
  if (!linalg::cholesky(k)) return kNegInf;

  std::vector<double> z(l);
  for (std::size_t i = 0; i < l; ++i) z[i] = doe.output(i) - hp.mean;
  linalg::solve_lower(k, z.data());
  return -0.5 * simd::dot(z.data(), z.data(), l) - 0.5 * linalg::log_det_chol(k) -
         0.5 * static_cast<double>(l) * kLog2Pi;
}

GpModel fit_gp(const Doe& doe, const GpConfig& config, Rng& rng,
               FitDiagnostics* diagnostics) {
  const std::size_t l = doe.size(), d = doe.dim();
  if (l < 2) throw std::invalid_argument("fit_gp: need at least 2 points");
  for (double y : doe.outputs())
    if (!std::isfinite(y)) throw std::invalid_argument("fit_gp: non-finite output");
  note_fit(d);

  const double lo = std::log(config.theta_min), hi = std::log(config.theta_max);
  const int evals_per_start =
      config.max_evals_per_start > 0 ? config.max_evals_per_start
                                     : 30 * static_cast<int>(d) + 30;

  // Start 0 at the per-dimension spread of the inputs; the rest from a Latin
  // hypercube over the log-space search box.
  std::vector<std::vector<double>> starts;
  {
    std::vector<double> t(d);
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < l; ++i) mean += doe.point(i)[j];
      mean /= static_cast<double>(l);
      double var = 0.0;
      for (std::size_t i = 0; i < l; ++i) {
        const double c = doe.point(i)[j] - mean;
        var += c * c;
      }
      double sd = std::sqrt(var / static_cast<double>(l));
      if (!(sd > 1e-12)) sd = 1.0;
      t[j] = std::clamp(sd, config.theta_min, config.theta_max);
    }
    starts.push_back(std::move(t));
  }
  if (config.n_starts > 1) {
    const std::size_t extra = static_cast<std::size_t>(config.n_starts) - 1;
    linalg::Matrix logs = latin_hypercube(extra, d, rng);
    for (std::size_t i = 0; i < extra; ++i) {
      std::vector<double> t(d);
      for (std::size_t j = 0; j < d; ++j) t[j] = std::exp(lo + (hi - lo) * logs(i, j));
      starts.push_back(std::move(t));
    }
  }

  BestTracker tracker;
  linalg::Matrix scratch(l, l);
  std::vector<double> wbuf, theta(d);
  auto objective = [&](const std::vector<double>& x) {
    for (std::size_t j = 0; j < d; ++j)
      theta[j] = std::exp(std::clamp(x[j], lo, hi));
    Profile p = profile_at(doe, theta, config.nugget_rel, scratch, wbuf);
    tracker.offer(theta, p);
    return p.ok ? -p.lml : std::numeric_limits<double>::infinity();
  };

  for (const auto& start : starts) {
    std::vector<double> x0(d);
    for (std::size_t j = 0; j < d; ++j) x0[j] = std::log(start[j]);
    Profile seed = profile_at(doe, start, config.nugget_rel, scratch, wbuf);
    tracker.offer(start, seed);
    if (diagnostics) {
      diagnostics->seed_thetas.push_back(start);
      diagnostics->seed_lmls.push_back(seed.ok ? seed.lml : kNegInf);
    }
    nelder_mead(objective, x0, 1.0, evals_per_start);
  }
  if (!tracker.profile.ok)
    throw GpFitError("fit_gp: covariance not positive definite at any candidate");

  // Escalate the jitter at the final factorization only.
  double nugget_rel = config.nugget_rel;
  Profile fin;
  linalg::Matrix chol(l, l);
  while (true) {
    inv_theta_sq(tracker.theta, wbuf);
    build_correlation(doe, wbuf, nugget_rel, chol);
    if (linalg::cholesky(chol)) {
      fin = profile_at(doe, tracker.theta, nugget_rel, scratch, wbuf);
      break;
    }
    if (nugget_rel >= config.nugget_rel_max)
      throw GpFitError("fit_gp: covariance not positive definite even at maximum nugget");
    nugget_rel = std::min(nugget_rel * 10.0, config.nugget_rel_max);
  }
  if (diagnostics) diagnostics->best_lml = fin.lml;

  GpModel model;
  model.kernel_lengthscales = tracker.theta;
  model.kernel_variance = fin.sigma2;
  model.nugget = nugget_rel * fin.sigma2;
  model.prior_mean_value = fin.mu;
  model.training_doe = doe;
  const double sd = std::sqrt(fin.sigma2);
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t j = 0; j <= i; ++j) chol(i, j) *= sd;
  model.chol_factor = std::move(chol);
  model.alpha.resize(l);
  for (std::size_t i = 0; i < l; ++i) model.alpha[i] = doe.output(i) - fin.mu;
  linalg::solve_lower(model.chol_factor, model.alpha.data());
  linalg::solve_lower_t(model.chol_factor, model.alpha.data());
  return model;
}

namespace {

void cross_covariance(const GpModel& m, const double* u, std::vector<double>& k,
                      std::vector<double>& w) {
  const Doe& doe = m.training_doe;
  inv_theta_sq(m.kernel_lengthscales, w);
  k.resize(doe.size());
  for (std::size_t i = 0; i < doe.size(); ++i) {
    k[i] = m.kernel_variance *
           std::exp(-0.5 * simd::weighted_sqdist(u, doe.point(i), w.data(), doe.dim()));
  }
}

}  // namespace

Prediction predict(const GpModel& model, const double* u) {
  const std::size_t l = model.training_doe.size();
  std::vector<double> k, w;
  cross_covariance(model, u, k, w);
  Prediction out;
  out.mean = model.prior_mean_value + simd::dot(k.data(), model.alpha.data(), l);
  std::vector<double> v = k;
  linalg::solve_lower(model.chol_factor, v.data());
  const double var = model.kernel_variance - simd::dot(v.data(), v.data(), l);
  out.std = var > 0.0 ? std::sqrt(var) : 0.0;
  return out;
}

Prediction predict(const GpModel& model, const std::vector<double>& u) {
  if (u.size() != model.training_doe.dim())
    throw std::invalid_argument("predict: dimension mismatch");
  return predict(model, u.data());
}

GpGradient predict_gradient(const GpModel& model, const double* u) {
  const Doe& doe = model.training_doe;
  const std::size_t l = doe.size(), d = doe.dim();
  std::vector<double> k, w;
  cross_covariance(model, u, k, w);

  std::vector<double> v = k;
  linalg::solve_lower(model.chol_factor, v.data());
  const double var = model.kernel_variance - simd::dot(v.data(), v.data(), l);
  const double std_ = var > 0.0 ? std::sqrt(var) : 0.0;

  std::vector<double> kw = v;  // continue to (K + nugget I)^{-1} k
  linalg::solve_lower_t(model.chol_factor, kw.data());

  GpGradient g;
  g.mean.assign(d, 0.0);
  std::vector<double> gvar(d, 0.0);
  for (std::size_t i = 0; i < l; ++i) {
    const double* xi = doe.point(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double dk = -k[i] * (u[j] - xi[j]) * w[j];
      g.mean[j] += model.alpha[i] * dk;
      gvar[j] -= 2.0 * kw[i] * dk;
    }
  }
  if (std_ > 0.0) {
    g.std.resize(d);
    for (std::size_t j = 0; j < d; ++j) g.std[j] = gvar[j] / (2.0 * std_);
  } else {
    g.std.assign(d, 0.0);
    g.degenerate = true;
  }
  return g;
}

GpGradient predict_gradient(const GpModel& model, const std::vector<double>& u) {
  if (u.size() != model.training_doe.dim())
    throw std::invalid_argument("predict_gradient: dimension mismatch");
  return predict_gradient(model, u.data());
}

GpFitStats gp_fit_stats() {
  return {g_fit_count.load(std::memory_order_relaxed),
          g_max_input_dim.load(std::memory_order_relaxed)};
}

void reset_gp_fit_stats() {
  g_fit_count.store(0, std::memory_order_relaxed);
  g_max_input_dim.store(0, std::memory_order_relaxed);
}

}  // namespace egorse::gp
