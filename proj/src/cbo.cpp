#include "egorse/cbo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "egorse/sampling.hpp"

namespace egorse::cbo {
namespace {

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double sigma_floor(const gp::GpModel& model) {
  return 1e-12 * std::sqrt(std::max(model.kernel_variance, 0.0));
}

struct Assessed {
  std::vector<double> u;
  CandidateRank rank;
  double sigma = 0.0;
  double cmean = 0.0;
};

}  // namespace

double ei_value(double mean, double sigma, double y_min) {
  if (!(sigma > 0.0)) return 0.0;
  const double z = (y_min - mean) / sigma;
  const double v = (y_min - mean) * norm_cdf(z) + sigma * norm_pdf(z);
  return v > 0.0 ? v : 0.0;
}

double expected_improvement(const gp::GpModel& model, const double* u, double y_min) {
  const gp::Prediction p = gp::predict(model, u);
  if (p.std < sigma_floor(model)) return 0.0;
  return ei_value(p.mean, p.std, y_min);
}

double expected_improvement(const gp::GpModel& model, const std::vector<double>& u,
                            double y_min) {
  return expected_improvement(model, u.data(), y_min);
}

std::vector<double> ei_gradient(const gp::GpModel& model, const double* u,
                                double y_min) {
  const std::size_t d = model.kernel_lengthscales.size();
  std::vector<double> g(d, 0.0);
  const gp::Prediction p = gp::predict(model, u);
  if (p.std < sigma_floor(model)) return g;
  const gp::GpGradient dg = gp::predict_gradient(model, u);
  if (dg.degenerate) return g;
  const double z = (y_min - p.mean) / p.std;
  const double cdf = norm_cdf(z);
  const double pdf = norm_pdf(z);
  for (std::size_t j = 0; j < d; ++j) {
    g[j] = -cdf * dg.mean[j] + pdf * dg.std[j];
  }
  return g;
}

bool rank_better(const CandidateRank& a, const CandidateRank& b) {
  if (a.feasible != b.feasible) return a.feasible;
  if (!a.feasible) {
    if (a.violation != b.violation) return a.violation < b.violation;
  }
  if (a.ei != b.ei) return a.ei > b.ei;
  if (a.norm != b.norm) return a.norm < b.norm;
  return a.index < b.index;
}

AcquisitionResult optimize_acquisition(const gp::GpModel& obj_gp,
                                       const gp::GpModel& cst_gp,
                                       const std::vector<double>& lower,
                                       const std::vector<double>& upper, double y_min,
                                       const AcquisitionSettings& settings, Rng& rng) {
  const std::size_t de = lower.size();
  if (de == 0 || upper.size() != de) {
    throw std::invalid_argument("optimize_acquisition: bad box");
  }
  for (std::size_t i = 0; i < de; ++i) {
    if (!(lower[i] < upper[i])) {
      throw std::invalid_argument("optimize_acquisition: empty box side");
    }
  }
  if (obj_gp.kernel_lengthscales.size() != de ||
      cst_gp.kernel_lengthscales.size() != de) {
    throw std::invalid_argument("optimize_acquisition: model dimension mismatch");
  }
  if (settings.global_population < 4 || settings.global_generations == 0 ||
      settings.local_refine_steps == 0) {
    throw std::invalid_argument("optimize_acquisition: counts must be positive");
  }

  std::size_t next_index = 0;
  Assessed best;
  Assessed most_uncertain;
  double max_ei_seen = 0.0;
  bool any = false;

  auto assess = [&](std::vector<double> u) {
    Assessed a;
    const gp::Prediction po = gp::predict(obj_gp, u.data());
    a.sigma = po.std;
    a.cmean = gp::predict(cst_gp, u.data()).mean;
    a.rank.ei = po.std < sigma_floor(obj_gp) ? 0.0 : ei_value(po.mean, po.std, y_min);
    a.rank.feasible = a.cmean >= 0.0;
    a.rank.violation = a.rank.feasible ? 0.0 : -a.cmean;
    a.rank.norm = l2_norm(u);
    a.rank.index = next_index++;
    a.u = std::move(u);
    max_ei_seen = std::max(max_ei_seen, a.rank.ei);
    if (!any || a.sigma > most_uncertain.sigma) most_uncertain = a;
    if (!any || rank_better(a.rank, best.rank)) best = a;
    any = true;
    return a;
  };

  const std::size_t pop_n = settings.global_population;
  linalg::Matrix init = latin_hypercube(pop_n, lower, upper, rng);
  std::vector<Assessed> pop;
  pop.reserve(pop_n);
  for (std::size_t i = 0; i < pop_n; ++i) {
    pop.push_back(assess(std::vector<double>(init.row(i), init.row(i) + de)));
  }

  // differential evolution, rand/1/bin
  const double f_weight = 0.7;
  const double crossover = 0.9;
  for (std::size_t gen = 0; gen < settings.global_generations; ++gen) {
    for (std::size_t i = 0; i < pop_n; ++i) {
      std::size_t r1, r2, r3;
      do r1 = rng.uniform_index(pop_n); while (r1 == i);
      do r2 = rng.uniform_index(pop_n); while (r2 == i || r2 == r1);
      do r3 = rng.uniform_index(pop_n); while (r3 == i || r3 == r1 || r3 == r2);
      const std::size_t j_rand = rng.uniform_index(de);
      std::vector<double> trial(de);
      for (std::size_t j = 0; j < de; ++j) {
        double v;
        if (rng.uniform() < crossover || j == j_rand) {
          v = pop[r1].u[j] + f_weight * (pop[r2].u[j] - pop[r3].u[j]);
        } else {
          v = pop[i].u[j];
        }
        trial[j] = std::max(lower[j], std::min(upper[j], v));
      }
      Assessed t = assess(std::move(trial));
      if (rank_better(t.rank, pop[i].rank)) pop[i] = std::move(t);
    }
  }

  AcquisitionResult out;
  if (max_ei_seen <= 0.0) {
    // nothing sampled promises improvement; hand back the widest posterior
    out.point = most_uncertain.u;
    out.ei = most_uncertain.rank.ei;
    out.sigma = most_uncertain.sigma;
    out.constraint_mean = most_uncertain.cmean;
    out.degenerate_ei = true;
    out.no_feasible_candidate = !best.rank.feasible;
    return out;
  }
  if (!best.rank.feasible) {
    out.point = best.u;
    out.ei = best.rank.ei;
    out.sigma = best.sigma;
    out.constraint_mean = best.cmean;
    out.no_feasible_candidate = true;
    return out;
  }

  // projected-gradient polish from the global winner
  double min_width = upper[0] - lower[0];
  for (std::size_t j = 1; j < de; ++j) min_width = std::min(min_width, upper[j] - lower[j]);
  Assessed cur = best;
  double step = 0.1 * min_width;
  for (std::size_t it = 0; it < settings.local_refine_steps; ++it) {
    std::vector<double> grad = ei_gradient(obj_gp, cur.u.data(), y_min);
    const double gnorm = l2_norm(grad);
    if (gnorm < 1e-8) break;
    bool accepted = false;
    double trial_step = step;
    while (trial_step >= 1e-12 * min_width) {
      std::vector<double> cand(de);
      for (std::size_t j = 0; j < de; ++j) {
        cand[j] = std::max(lower[j],
                           std::min(upper[j], cur.u[j] + trial_step * grad[j] / gnorm));
      }
      Assessed t = assess(std::move(cand));
      if (t.rank.feasible && t.rank.ei > cur.rank.ei) {
        cur = std::move(t);
        step = std::min(trial_step * 1.3, min_width);
        accepted = true;
        break;
      }
      trial_step *= 0.5;
    }
    if (!accepted) break;
  }

  out.point = best.u;
  out.ei = best.rank.ei;
  out.sigma = best.sigma;
  out.constraint_mean = best.cmean;
  return out;
}

namespace {

// evaluate_candidate with a guard for borderline members whose exact-preimage
// projection cannot reach the pinned residual; the total map stands in.
subspace::Candidate guarded_candidate(const subspace::Subspace& space,
                                      const std::vector<double>& u) {
  try {
    return subspace::evaluate_candidate(space, u.data());
  } catch (const std::runtime_error&) {
    subspace::Candidate c;
    c.mapped = subspace::gamma_w(space, u.data());
    c.used_map = 'W';
    double nsq = 0.0;
    for (double v : c.mapped) nsq += v * v;
    c.constraint = 1.0 - nsq / static_cast<double>(space.d());
    return c;
  }
}

}  // namespace

SubspaceRun run_cbo(const subspace::Subspace& space,
                    const std::function<double(const double*)>& f_full,
                    const Doe* existing_archive, std::size_t budget,
                    const CboSettings& settings, Rng& rng) {
  if (budget == 0) throw std::invalid_argument("run_cbo: budget must be positive");
  if (!f_full) throw std::invalid_argument("run_cbo: empty objective");
  const std::size_t de = space.d_e();

  std::vector<double> lo(de), hi(de);
  for (std::size_t i = 0; i < de; ++i) {
    lo[i] = -space.bounds[i];
    hi[i] = space.bounds[i];
  }

  SubspaceRun run(space, budget);

  auto too_close = [&](const std::vector<double>& u) {
    for (std::size_t i = 0; i < run.inner_doe.size(); ++i) {
      double s = 0.0;
      const double* p = run.inner_doe.point(i);
      for (std::size_t j = 0; j < de; ++j) s += (u[j] - p[j]) * (u[j] - p[j]);
      if (s <= 1e-24) return true;
    }
    return false;
  };

  auto random_point = [&] {
    std::vector<double> u(de);
    for (int attempt = 0; attempt < 100; ++attempt) {
      for (std::size_t j = 0; j < de; ++j) u[j] = rng.uniform(lo[j], hi[j]);
      if (!too_close(u)) return u;
    }
    return u;
  };

  auto do_eval = [&](std::vector<double> u, bool fallback) {
    if (too_close(u)) {
      u = random_point();
      fallback = true;
    }
    subspace::Candidate c = guarded_candidate(run.space, u);
    const double v = f_full(c.mapped.data());
    if (!run.inner_doe.add(u, v)) {
      throw std::logic_error("run_cbo: duplicate slipped past the guard");
    }
    run.constraint_values.push_back(c.constraint);
    run.full_points.push_back(c.mapped);
    run.full_values.push_back(v);
    run.used_maps.push_back(c.used_map);
    run.acquisition_fallbacks.push_back(fallback);
    run.non_finite_values.push_back(!std::isfinite(v));
    ++run.evaluations_used;
  };

  // seed phase
  const std::size_t n0 = std::min(de + 2, budget);
  std::vector<std::vector<double>> seeds;
  if (settings.seed_source == SeedSource::projected_archive && existing_archive &&
      !existing_archive->empty() && existing_archive->dim() == space.d()) {
    // project the best archived full points; they are re-evaluated through
    // the backward map, so budget accounting is unchanged
    std::vector<std::size_t> order(existing_archive->size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double ya = existing_archive->output(a);
      const double yb = existing_archive->output(b);
      const bool fa = std::isfinite(ya), fb = std::isfinite(yb);
      if (fa != fb) return fa;
      if (fa && ya != yb) return ya < yb;
      return a < b;
    });
    for (std::size_t i = 0; i < order.size() && seeds.size() < n0; ++i) {
      std::vector<double> u(de);
      linalg::matvec(space.transfer.entries, existing_archive->point(order[i]),
                     u.data());
      bool dup = false;
      for (const auto& s : seeds) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < de; ++j) d2 += (u[j] - s[j]) * (u[j] - s[j]);
        dup = dup || d2 <= 1e-24;
      }
      if (!dup) seeds.push_back(std::move(u));
    }
  }
  if (seeds.size() < n0) {
    const linalg::Matrix fill = latin_hypercube(n0 - seeds.size(), lo, hi, rng);
    for (std::size_t i = 0; i < fill.rows(); ++i) {
      seeds.emplace_back(fill.row(i), fill.row(i) + de);
    }
  }
  for (auto& s : seeds) do_eval(std::move(s), false);

  // BO phase
  while (run.evaluations_used < budget) {
    Doe obj_train(de);
    Doe cst_train(de);
    double y_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < run.inner_doe.size(); ++i) {
      const double* u = run.inner_doe.point(i);
      const double y = run.inner_doe.output(i);
      if (std::isfinite(y)) {
        obj_train.add(u, y);
        y_min = std::min(y_min, y);
      }
      cst_train.add(u, run.constraint_values[i]);
    }

    bool fallback = false;
    std::vector<double> u_next;
    if (obj_train.size() >= 2) {
      try {
        const gp::GpModel obj_gp = gp::fit_gp(obj_train, settings.gp_config, rng);
        const gp::GpModel cst_gp = gp::fit_gp(cst_train, settings.gp_config, rng);
        AcquisitionResult acq = optimize_acquisition(
            obj_gp, cst_gp, lo, hi, y_min, settings.acquisition, rng);
        u_next = std::move(acq.point);
      } catch (const gp::GpFitError&) {
        fallback = true;
      }
    } else {
      fallback = true;
    }
    if (fallback) u_next = random_point();
    do_eval(std::move(u_next), fallback);
  }
  return run;
}

}  // namespace egorse::cbo
