#pragma once

#include <vector>

#include "egorse/linalg.hpp"
#include "egorse/rng.hpp"

namespace egorse {

// Latin hypercube: n rows, one stratified sample per (row, dimension) cell,
// columns shuffled independently. Unit-cube and general-box forms.
linalg::Matrix latin_hypercube(std::size_t n, std::size_t dim, Rng& rng);
linalg::Matrix latin_hypercube(std::size_t n, const std::vector<double>& lo,
                               const std::vector<double>& hi, Rng& rng);

}  // namespace egorse
