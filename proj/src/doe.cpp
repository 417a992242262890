#include "egorse/doe.hpp"

#include "egorse/simd/kernels.hpp"

namespace egorse {

bool Doe::add(const double* x, double y) {
  if (dim_ == 0) throw std::logic_error("Doe::add: archive has no dimension");
  const double thresh2 = 1e-12 * 1e-12;
  for (std::size_t i = 0; i < y_.size(); ++i) {
    if (simd::sqdist(point(i), x, dim_) <= thresh2) return false;
  }
  x_.insert(x_.end(), x, x + dim_);
  y_.push_back(y);
  return true;
}

std::size_t Doe::best_index() const {
  if (y_.empty()) throw std::logic_error("Doe::best_index: archive is empty");
  std::size_t best = 0;
  for (std::size_t i = 1; i < y_.size(); ++i) {
    if (y_[i] < y_[best]) best = i;
  }
  return best;
}

}  // namespace egorse
