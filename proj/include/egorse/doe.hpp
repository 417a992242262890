#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace egorse {

// Archive of evaluated points with their outputs. Points live in one flat
// row-major buffer so rows feed the simd kernels directly.
class Doe {
 public:
  Doe() = default;
  explicit Doe(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw std::invalid_argument("Doe: dimension must be >= 1");
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return y_.size(); }
  bool empty() const { return y_.empty(); }

  // Rejects a point lying within Euclidean distance 1e-12 of an existing one;
  // returns whether the point was stored.
  bool add(const double* x, double y);
  bool add(const std::vector<double>& x, double y) {
    if (x.size() != dim_) throw std::invalid_argument("Doe::add: dimension mismatch");
    return add(x.data(), y);
  }

  const double* point(std::size_t i) const { return x_.data() + i * dim_; }
  double output(std::size_t i) const { return y_[i]; }
  const std::vector<double>& outputs() const { return y_; }
  const double* points_data() const { return x_.data(); }

  // Earliest index attaining the minimum output.
  std::size_t best_index() const;
  double y_min() const { return y_[best_index()]; }

 private:
  std::size_t dim_ = 0;
  std::vector<double> x_;
  std::vector<double> y_;
};

}  // namespace egorse
