#include "egorse/embeddings.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "egorse/gp.hpp"
#include "egorse/simd/kernels.hpp"

namespace egorse::embeddings {

using linalg::Matrix;

namespace {

void check_dims(std::size_t d, std::size_t d_e) {
  if (d_e == 0 || d_e >= d)
    throw std::invalid_argument("embedding: require 1 <= d_e < d");
}

Matrix gaussian_entries(std::size_t d, std::size_t d_e, Rng& rng) {
  Matrix a(d_e, d);
  for (std::size_t i = 0; i < d_e; ++i)
    for (std::size_t j = 0; j < d; ++j) a(i, j) = rng.normal();
  return a;
}

}  // namespace

void save_transfer_matrix(const TransferMatrix& tm, std::ostream& os) {
  os << tm.d_e << ' ' << tm.d << ' ' << tm.method_tag << ' ' << tm.seed << '\n';
  char buf[40];
  for (std::size_t i = 0; i < tm.d_e; ++i) {
    for (std::size_t j = 0; j < tm.d; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", tm.entries(i, j));
      os << (j ? " " : "") << buf;
    }
    os << '\n';
  }
}

void save_transfer_matrix(const TransferMatrix& tm, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write transfer matrix: " + path);
  save_transfer_matrix(tm, os);
  if (!os.good()) throw std::runtime_error("write failed: " + path);
}

TransferMatrix load_transfer_matrix(std::istream& is) {
  TransferMatrix tm;
  if (!(is >> tm.d_e >> tm.d >> tm.method_tag >> tm.seed))
    throw std::runtime_error("transfer matrix: malformed header");
  if (tm.d_e == 0 || tm.d_e >= tm.d)
    throw std::runtime_error("transfer matrix: header violates 1 <= d_e < d");
  tm.entries = Matrix(tm.d_e, tm.d);
  for (std::size_t i = 0; i < tm.d_e; ++i)
    for (std::size_t j = 0; j < tm.d; ++j) {
      if (!(is >> tm.entries(i, j)) || !std::isfinite(tm.entries(i, j)))
        throw std::runtime_error("transfer matrix: bad entry at row " +
                                 std::to_string(i));
    }
  return tm;
}

TransferMatrix load_transfer_matrix(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read transfer matrix: " + path);
  return load_transfer_matrix(is);
}

TransferMatrix gaussian_embedding(std::size_t d, std::size_t d_e, Rng& rng) {
  check_dims(d, d_e);
  return {gaussian_entries(d, d_e, rng), "gaussian", d, d_e, rng.seed()};
}

TransferMatrix hash_embedding(std::size_t d, std::size_t d_e, Rng& rng) {
  check_dims(d, d_e);
  Matrix a(d_e, d);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    for (double* p = a.data(); p != a.data() + d_e * d; ++p) *p = 0.0;
    std::vector<bool> row_used(d_e, false);
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t r = rng.uniform_index(d_e);
      a(r, j) = rng.uniform() < 0.5 ? 1.0 : -1.0;
      row_used[r] = true;
    }
    bool full = true;
    for (bool used : row_used) full = full && used;
    if (full) return {std::move(a), "hash", d, d_e, rng.seed()};
  }
  throw std::runtime_error("hash_embedding: could not fill every row");
}

TransferMatrix pls_embedding(const Doe& doe, std::size_t d_e, Rng& rng,
                             PlsState* state, bool* padded) {
  const std::size_t l = doe.size(), d = doe.dim();
  check_dims(d, d_e);
  if (padded) *padded = false;
  if (l < d_e + 1)
    throw PlsError("pls_embedding: need at least d_e+1 points");

  // center inputs and outputs
  Matrix x(l, d);
  std::vector<double> y(l), col_mean(d, 0.0);
  double y_mean = 0.0;
  for (std::size_t i = 0; i < l; ++i) {
    const double* xi = doe.point(i);
    for (std::size_t j = 0; j < d; ++j) col_mean[j] += xi[j];
    y_mean += doe.output(i);
  }
  for (double& m : col_mean) m /= static_cast<double>(l);
  y_mean /= static_cast<double>(l);
  for (std::size_t i = 0; i < l; ++i) {
    const double* xi = doe.point(i);
    for (std::size_t j = 0; j < d; ++j) x(i, j) = xi[j] - col_mean[j];
    y[i] = doe.output(i) - y_mean;
  }

  Matrix directions(d, d_e), scores(l, d_e), loadings_p(d, d_e);
  std::vector<double> loadings_c;
  std::vector<double> w(d), t(l), p(d);
  std::size_t k = 0;
  for (std::size_t comp = 0; comp < d_e; ++comp) {
    linalg::matvec_t(x, y.data(), w.data());
    const double nw = std::sqrt(simd::dot(w.data(), w.data(), d));
    if (nw < 1e-14) break;
    for (std::size_t j = 0; j < d; ++j) w[j] /= nw;
    linalg::matvec(x, w.data(), t.data());
    const double tt = simd::dot(t.data(), t.data(), l);
    if (tt < 1e-30) break;
    linalg::matvec_t(x, t.data(), p.data());
    for (std::size_t j = 0; j < d; ++j) p[j] /= tt;
    const double c = simd::dot(y.data(), t.data(), l) / tt;

    for (std::size_t j = 0; j < d; ++j) {
      directions(j, comp) = w[j];
      loadings_p(j, comp) = p[j];
    }
    for (std::size_t i = 0; i < l; ++i) scores(i, comp) = t[i];
    loadings_c.push_back(c);
    ++k;

    for (std::size_t i = 0; i < l; ++i)
      simd::axpy(-t[i], p.data(), x.row(i), d);
    simd::axpy(-c, t.data(), y.data(), l);
  }
  if (k == 0)
    throw PlsError("pls_embedding: outputs carry no covariance with the inputs");

  // A = [A'(P^T A')^{-1}]^T over the k completed components
  Matrix ap(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (std::size_t m = 0; m < d; ++m) s += loadings_p(m, i) * directions(m, j);
      ap(i, j) = s;
    }
  Matrix inv;
  try {
    inv = linalg::small_inverse(std::move(ap));
  } catch (const std::runtime_error&) {
    throw PlsError("pls_embedding: loading-direction system is singular");
  }
  Matrix a(d_e, d);
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t m = 0; m < k; ++m) s += directions(j, m) * inv(m, r);
      a(r, j) = s;
    }
  if (k < d_e) {
    for (std::size_t r = k; r < d_e; ++r)
      for (std::size_t j = 0; j < d; ++j) a(r, j) = rng.normal();
    if (padded) *padded = true;
  }

  if (state) {
    state->residual_inputs = std::move(x);
    state->residual_outputs = std::move(y);
    auto shrink = [&](const Matrix& m) {
      Matrix out(m.rows(), k);
      for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < k; ++j) out(i, j) = m(i, j);
      return out;
    };
    state->directions = shrink(directions);
    state->scores = shrink(scores);
    state->loadings_p = shrink(loadings_p);
    state->loadings_c = std::move(loadings_c);
  }
  return {std::move(a), "pls", d, d_e, rng.seed()};
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093453;

// Archive mapped through A; nullopt when two points collide in reduced space.
std::optional<Doe> reduce_archive(const Doe& doe, const Matrix& a) {
  Doe out(a.rows());
  std::vector<double> u(a.rows());
  for (std::size_t i = 0; i < doe.size(); ++i) {
    linalg::matvec(a, doe.point(i), u.data());
    if (!out.add(u.data(), doe.output(i))) return std::nullopt;
  }
  return out;
}

struct MgpObjective {
  const Doe& doe;
  const Matrix& prior_mean;
  double prior_sigma;

  double log_prior(const Matrix& a) const {
    const std::size_t n = a.rows() * a.cols();
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = (a.data()[i] - prior_mean.data()[i]) / prior_sigma;
      q += z * z;
    }
    return -0.5 * q - 0.5 * static_cast<double>(n) *
                          (kLog2Pi + 2.0 * std::log(prior_sigma));
  }

  double operator()(const Matrix& a, const std::vector<double>& theta) const {
    std::optional<Doe> reduced = reduce_archive(doe, a);
    if (!reduced) return kNegInf;
    const double lml = gp::profiled_lml(*reduced, theta, 1e-8).value;
    if (!std::isfinite(lml)) return kNegInf;
    return log_prior(a) + lml;
  }

  // refit lengthscales on the archive as seen through a; keeps theta on failure
  void profile(const Matrix& a, std::vector<double>& theta, Rng& fit_rng) const {
    std::optional<Doe> reduced = reduce_archive(doe, a);
    if (!reduced) return;
    try {
      gp::GpConfig cfg;
      cfg.n_starts = 4;
      theta = gp::fit_gp(*reduced, cfg, fit_rng).kernel_lengthscales;
    } catch (const gp::GpFitError&) {
    }
  }
};

std::vector<double> fd_gradient(const MgpObjective& obj, const Matrix& a,
                                const std::vector<double>& theta, double h) {
  const std::size_t n = a.rows() * a.cols();
  std::vector<double> g(n);
  Matrix work = a;
  for (std::size_t i = 0; i < n; ++i) {
    const double saved = work.data()[i];
    work.data()[i] = saved + h;
    const double fp = obj(work, theta);
    work.data()[i] = saved - h;
    const double fm = obj(work, theta);
    work.data()[i] = saved;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double norm2(const std::vector<double>& v) {
  return std::sqrt(simd::dot(v.data(), v.data(), v.size()));
}

// BFGS ascent on the log posterior; the likelihood term forms curved ridges
// that defeat plain gradient steps. The inverse-Hessian estimate is rebuilt
// whenever the lengthscales are re-profiled (the objective changes under us).
struct AscentState {
  Matrix a;
  std::vector<double> theta;
  double lp = kNegInf;
};

void bfgs_ascend(const MgpObjective& obj, const MgpConfig& config,
                 AscentState& st, Rng& fit_rng) {
  if (config.map_iterations <= 0) return;
  const std::size_t n = st.a.rows() * st.a.cols();
  std::vector<double> g = fd_gradient(obj, st.a, st.theta, config.fd_step);
  Matrix h_inv(n, n);
  auto reset_h = [&] {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) h_inv(i, j) = i == j ? 1.0 : 0.0;
  };
  reset_h();
  bool h_fresh = true;
  int accepted = 0;

  std::vector<double> dir(n), g_new(n), s(n), yv(n), hy(n);
  for (int iter = 0; iter < config.map_iterations; ++iter) {
    if (norm2(g) <= config.map_tolerance * (1.0 + std::fabs(st.lp))) return;

    linalg::matvec(h_inv, g.data(), dir.data());
    double dg = simd::dot(dir.data(), g.data(), n);
    if (!(dg > 0.0)) {
      reset_h();
      h_fresh = true;
      dir = g;
      dg = simd::dot(g.data(), g.data(), n);
    }

    double step = 1.0;
    bool ok = false;
    Matrix trial = st.a;
    double lp_trial = kNegInf;
    while (step >= 1e-14) {
      for (std::size_t i = 0; i < n; ++i)
        trial.data()[i] = st.a.data()[i] + step * dir[i];
      lp_trial = obj(trial, st.theta);
      if (lp_trial > st.lp + 1e-4 * step * dg) {
        ok = true;
        break;
      }
      step *= 0.5;
    }
    if (!ok) {
      if (h_fresh) return;  // stalled even on the raw gradient
      reset_h();
      h_fresh = true;
      continue;
    }

    g_new = fd_gradient(obj, trial, st.theta, config.fd_step);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = trial.data()[i] - st.a.data()[i];
      yv[i] = g[i] - g_new[i];  // minimization convention on -lp
    }
    const double sy = simd::dot(s.data(), yv.data(), n);
    if (sy > 1e-12 * norm2(s) * norm2(yv)) {
      const double rho = 1.0 / sy;
      linalg::matvec(h_inv, yv.data(), hy.data());
      const double yhy = simd::dot(yv.data(), hy.data(), n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          h_inv(i, j) += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] -
                                s[i] * hy[j]);
      h_fresh = false;
    }

    st.a = std::move(trial);
    st.lp = lp_trial;
    g = g_new;
    ++accepted;
    if (config.profile_every > 0 && accepted % config.profile_every == 0) {
      obj.profile(st.a, st.theta, fit_rng);
      st.lp = obj(st.a, st.theta);
      g = fd_gradient(obj, st.a, st.theta, config.fd_step);
      reset_h();
      h_fresh = true;
    }
  }
}

}  // namespace

MgpResult mgp_embedding(const Doe& doe, std::size_t d_e, const MgpConfig& config,
                        Rng& rng) {
  const std::size_t d = doe.dim();
  check_dims(d, d_e);
  if (doe.size() < 3)
    throw std::invalid_argument("mgp_embedding: need at least 3 points");
  if (!(config.prior_sigma > 0.0))
    throw std::invalid_argument("mgp_embedding: prior scale must be positive");

  Matrix prior;
  if (config.prior_mean.rows() == 0) {
    try {
      prior = pls_embedding(doe, d_e, rng).entries;
    } catch (const PlsError&) {
      prior = gaussian_entries(d, d_e, rng);
    }
  } else if (config.prior_mean.rows() == d_e && config.prior_mean.cols() == d) {
    prior = config.prior_mean;
  } else {
    throw std::invalid_argument("mgp_embedding: prior mean has wrong shape");
  }

  MgpObjective obj{doe, prior, config.prior_sigma};
  Rng fit_rng = rng.derive(0x6d6770);

  std::vector<Matrix> starts{prior};
  for (int s = 1; s < config.n_starts; ++s) {
    Matrix a = prior;
    for (std::size_t i = 0; i < d_e * d; ++i)
      a.data()[i] += config.prior_sigma * rng.normal();
    starts.push_back(std::move(a));
  }

  Matrix best_a = prior;
  std::vector<double> best_theta(d_e, 1.0);
  double best_lp = kNegInf, prior_lp = kNegInf;

  for (std::size_t s = 0; s < starts.size(); ++s) {
    AscentState st{starts[s], std::vector<double>(d_e, 1.0), kNegInf};
    obj.profile(st.a, st.theta, fit_rng);
    st.lp = obj(st.a, st.theta);
    if (s == 0) prior_lp = st.lp;
    if (!std::isfinite(st.lp)) continue;

    bfgs_ascend(obj, config, st, fit_rng);
    if (st.lp > best_lp) {
      best_lp = st.lp;
      best_a = st.a;
      best_theta = st.theta;
    }
  }

  MgpResult res;
  if (!std::isfinite(best_lp) || best_lp <= prior_lp) {
    res.used_prior_fallback = true;
    best_a = prior;
    best_lp = prior_lp;
  }
  res.log_posterior = best_lp;
  if (std::isfinite(best_lp)) {
    res.gradient_norm_at_map =
        norm2(fd_gradient(obj, best_a, best_theta, config.fd_step));
  }

  if (config.compute_posterior_covariance && std::isfinite(best_lp)) {
    const std::size_t n = d_e * d;
    const double h = 1e-4;
    Matrix hess(n, n);
    Matrix work = best_a;
    auto at = [&](std::size_t i, double di, std::size_t j, double dj) {
      work.data()[i] += di;
      work.data()[j] += dj;
      const double v = obj(work, best_theta);
      work.data()[i] -= di;
      work.data()[j] -= dj;
      return v;
    };
    const double f0 = best_lp;
    for (std::size_t i = 0; i < n; ++i) {
      hess(i, i) = (at(i, h, i, 0.0) + at(i, -h, i, 0.0) - 2.0 * f0) / (h * h);
      for (std::size_t j = i + 1; j < n; ++j) {
        const double v = (at(i, h, j, h) + at(i, -h, j, -h) - at(i, h, j, -h) -
                          at(i, -h, j, h)) /
                         (4.0 * h * h);
        hess(i, j) = v;
        hess(j, i) = v;
      }
    }
    for (std::size_t i = 0; i < n * n; ++i) hess.data()[i] = -hess.data()[i];
    try {
      res.posterior_covariance = linalg::small_inverse(std::move(hess));
    } catch (const std::runtime_error&) {
    }
  }

  res.map_matrix = {std::move(best_a), "mgp", d, d_e, rng.seed()};
  return res;
}

}  // namespace egorse::embeddings
