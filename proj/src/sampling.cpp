#include "egorse/sampling.hpp"

#include <numeric>
#include <stdexcept>

namespace egorse {

linalg::Matrix latin_hypercube(std::size_t n, std::size_t dim, Rng& rng) {
  if (n == 0 || dim == 0) throw std::invalid_argument("latin_hypercube: empty design");
  linalg::Matrix out(n, dim);
  std::vector<std::size_t> perm(n);
  for (std::size_t j = 0; j < dim; ++j) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    // Fisher-Yates, draw order fixed for reproducibility
    for (std::size_t i = n; i-- > 1;) {
      const std::size_t k = rng.uniform_index(i + 1);
      std::swap(perm[i], perm[k]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      out(i, j) = (static_cast<double>(perm[i]) + rng.uniform()) / static_cast<double>(n);
    }
  }
  return out;
}

linalg::Matrix latin_hypercube(std::size_t n, const std::vector<double>& lo,
                               const std::vector<double>& hi, Rng& rng) {
  if (lo.size() != hi.size()) throw std::invalid_argument("latin_hypercube: bound size mismatch");
  linalg::Matrix out = latin_hypercube(n, lo.size(), rng);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < lo.size(); ++j)
      out(i, j) = lo[j] + (hi[j] - lo[j]) * out(i, j);
  return out;
}

}  // namespace egorse
