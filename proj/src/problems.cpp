#include "egorse/problems.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "egorse/embeddings.hpp"
#include "egorse/rng.hpp"

namespace egorse::problems {
namespace {

void check_box(const double* x, std::size_t n, double slack, const char* who) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!(std::fabs(x[i]) <= 1.0 + slack)) {
      throw std::domain_error(std::string(who) + ": input outside [-1,1]");
    }
  }
}

}  // namespace

double modified_branin(const double* u) {
  check_box(u, 2, 1e-9, "modified_branin");
  constexpr double pi = std::numbers::pi;
  const double u1 = -5.0 + (u[0] + 1.0) * 7.5;
  const double u2 = (u[1] + 1.0) * 7.5;
  const double q = u2 - 5.1 * u1 * u1 / (4.0 * pi * pi) + 5.0 * u1 / pi - 6.0;
  return q * q + (10.0 - 10.0 / (8.0 * pi)) * std::cos(u1) + 10.0 +
         (5.0 * u1 + 25.0) / 15.0;
}

double modified_branin(const std::vector<double>& u) {
  if (u.size() != 2) {
    throw std::invalid_argument("modified_branin: expects 2 coordinates");
  }
  return modified_branin(u.data());
}

EmbeddedProblem::EmbeddedProblem(Objective base, linalg::Matrix inflation,
                                 std::uint64_t seed)
    : base_(std::move(base)),
      inflation_(std::move(inflation)),
      seed_(seed),
      counter_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
  if (!base_) throw std::invalid_argument("EmbeddedProblem: empty base objective");
  const std::size_t db = inflation_.rows();
  const std::size_t d = inflation_.cols();
  if (db == 0 || d == 0) {
    throw std::invalid_argument("EmbeddedProblem: empty inflation matrix");
  }
  for (std::size_t i = 0; i < db; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double v = inflation_(i, j);
      if (!std::isfinite(v)) {
        throw std::invalid_argument("EmbeddedProblem: non-finite inflation entry");
      }
      s += std::fabs(v);
    }
    // the containment property hinges on this
    if (s > 1.0 + 1e-12) {
      throw std::invalid_argument(
          "EmbeddedProblem: inflation row " + std::to_string(i) +
          " has absolute sum above 1");
    }
  }
}

double EmbeddedProblem::evaluate(const double* x) const {
  check_box(x, dim(), 1e-12, "EmbeddedProblem::evaluate");
  std::vector<double> u(base_dim());
  linalg::matvec(inflation_, x, u.data());
  const double v = base_(u.data());
  counter_->fetch_add(1, std::memory_order_relaxed);
  return v;
}

double EmbeddedProblem::evaluate(const std::vector<double>& x) const {
  if (x.size() != dim()) {
    throw std::invalid_argument("EmbeddedProblem::evaluate: wrong dimension");
  }
  return evaluate(x.data());
}

EmbeddedProblem inflate(EmbeddedProblem::Objective base, std::size_t d_base,
                        std::size_t d, std::uint64_t seed) {
  if (d <= d_base) {
    throw std::invalid_argument("inflate: d must exceed d_base");
  }
  if (d_base == 0) throw std::invalid_argument("inflate: d_base must be positive");
  Rng rng(seed);
  linalg::Matrix a(d_base, d);
  for (std::size_t i = 0; i < d_base; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      a(i, j) = rng.normal();
      sum += std::fabs(a(i, j));
    }
    if (sum < 1e-12) throw std::runtime_error("inflate: degenerate row draw");
    for (std::size_t j = 0; j < d; ++j) a(i, j) /= sum;
  }
  return EmbeddedProblem(std::move(base), std::move(a), seed);
}

EmbeddedProblem make_problem(const std::string& name) {
  auto branin = [](const double* u) { return modified_branin(u); };
  if (name == "mb_10") return inflate(branin, 2, 10, kRegistrySeed);
  if (name == "mb_100") return inflate(branin, 2, 100, kRegistrySeed);
  if (name == "mb_600") return inflate(branin, 2, 600, kRegistrySeed);
  if (name.rfind("custom:", 0) == 0) {
    const std::string path = name.substr(7);
    embeddings::TransferMatrix tm = embeddings::load_transfer_matrix(path);
    if (tm.d_e != 2) {
      throw std::invalid_argument(
          "make_problem: custom inflation matrix must have 2 rows, got " +
          std::to_string(tm.d_e));
    }
    return EmbeddedProblem(branin, tm.entries, tm.seed);
  }
  throw std::invalid_argument("make_problem: unknown problem '" + name + "'");
}

}  // namespace egorse::problems
