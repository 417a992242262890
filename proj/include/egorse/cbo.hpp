#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "egorse/doe.hpp"
#include "egorse/gp.hpp"
#include "egorse/rng.hpp"
#include "egorse/subspace.hpp"

namespace egorse::cbo {

// Closed-form expected improvement for a minimization incumbent y_min.
// Total: non-positive sigma gives 0.
double ei_value(double mean, double sigma, double y_min);

double expected_improvement(const gp::GpModel& model, const double* u, double y_min);
double expected_improvement(const gp::GpModel& model, const std::vector<double>& u,
                            double y_min);

// Analytic gradient -Phi(z)*grad_mean + phi(z)*grad_std; zero where the
// posterior is degenerate.
std::vector<double> ei_gradient(const gp::GpModel& model, const double* u,
                                double y_min);

struct AcquisitionSettings {
  std::size_t global_population = 50;
  std::size_t global_generations = 40;
  std::size_t local_refine_steps = 50;
  bool feasibility_by_constraint_mean = true;  // the only supported rule
};

// Ranking used everywhere a candidate set is reduced: any predicted-feasible
// candidate outranks every infeasible one; feasible sort by EI descending,
// infeasible by violation ascending; ties fall through to smaller norm, then
// insertion index.
struct CandidateRank {
  bool feasible = false;
  double ei = 0.0;
  double violation = 0.0;
  double norm = 0.0;
  std::size_t index = 0;
};
bool rank_better(const CandidateRank& a, const CandidateRank& b);

struct AcquisitionResult {
  std::vector<double> point;
  double ei = 0.0;
  double sigma = 0.0;
  double constraint_mean = 0.0;
  bool no_feasible_candidate = false;
  bool degenerate_ei = false;
};

AcquisitionResult optimize_acquisition(const gp::GpModel& obj_gp,
                                       const gp::GpModel& cst_gp,
                                       const std::vector<double>& lower,
                                       const std::vector<double>& upper, double y_min,
                                       const AcquisitionSettings& settings, Rng& rng);

enum class SeedSource { lhs, projected_archive };

struct CboSettings {
  AcquisitionSettings acquisition;
  SeedSource seed_source = SeedSource::lhs;
  gp::GpConfig gp_config;
};

struct SubspaceRun {
  subspace::Subspace space;
  Doe inner_doe;  // every evaluated (u, f) pair, non-finite outputs included
  std::vector<double> constraint_values;
  std::vector<std::vector<double>> full_points;
  std::vector<double> full_values;
  std::vector<char> used_maps;
  std::vector<bool> acquisition_fallbacks;  // point came from a fallback draw
  std::vector<bool> non_finite_values;
  std::size_t budget = 0;
  std::size_t evaluations_used = 0;

  SubspaceRun(subspace::Subspace s, std::size_t b)
      : space(std::move(s)), inner_doe(space.d_e()), budget(b) {}
};

// One inner constrained BO run inside the reduced box. Each expensive
// evaluation goes through the memoized candidate path: one membership solve,
// one backward map, one f call. existing_archive may be null; it only feeds
// the projected_archive seeding mode.
SubspaceRun run_cbo(const subspace::Subspace& space,
                    const std::function<double(const double*)>& f_full,
                    const Doe* existing_archive, std::size_t budget,
                    const CboSettings& settings, Rng& rng);

}  // namespace egorse::cbo
