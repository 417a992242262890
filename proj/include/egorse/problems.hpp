#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "egorse/linalg.hpp"

namespace egorse::problems {

// Modified Branin on the normalized square, mapped affinely onto
// [-5,10] x [0,15]. Three local minima, global value near 1.01.
double modified_branin(const double* u);
double modified_branin(const std::vector<double>& u);

// A low-dimensional objective lifted to dimension d through a row-normalized
// matrix, so the image of the big box stays inside the base box.
class EmbeddedProblem {
 public:
  using Objective = std::function<double(const double*)>;

  EmbeddedProblem(Objective base, linalg::Matrix inflation, std::uint64_t seed);

  double evaluate(const double* x) const;
  double evaluate(const std::vector<double>& x) const;

  std::size_t dim() const { return inflation_.cols(); }
  std::size_t base_dim() const { return inflation_.rows(); }
  const linalg::Matrix& inflation() const { return inflation_; }
  std::uint64_t seed() const { return seed_; }

  // Copies share one counter, so audits see every evaluation of the instance.
  std::uint64_t evaluation_count() const { return counter_->load(); }
  void reset_evaluation_count() const { counter_->store(0); }

 private:
  Objective base_;
  linalg::Matrix inflation_;
  std::uint64_t seed_ = 0;
  std::shared_ptr<std::atomic<std::uint64_t>> counter_;
};

EmbeddedProblem inflate(EmbeddedProblem::Objective base, std::size_t d_base,
                        std::size_t d, std::uint64_t seed);

// "mb_10" | "mb_100" | "mb_600" | "custom:<path to transfer matrix text>"
EmbeddedProblem make_problem(const std::string& name);

inline constexpr std::uint64_t kRegistrySeed = 0x4d42;

}  // namespace egorse::problems
