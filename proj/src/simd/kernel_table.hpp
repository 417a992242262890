#pragma once

#include <cstddef>

// Internal dispatch table shared by the backend translation units.

namespace egorse::simd {

struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t);
  double (*sum)(const double*, std::size_t);
  double (*abs_sum)(const double*, std::size_t);
  double (*sqdist)(const double*, const double*, std::size_t);
  double (*weighted_sqdist)(const double*, const double*, const double*,
                            std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*scale)(double, double*, std::size_t);
  void (*sub)(const double*, const double*, double*, std::size_t);
  void (*clamp)(const double*, double, double, double*, std::size_t);
  double (*max_abs_diff)(const double*, const double*, std::size_t);
};

const KernelTable& scalar_table();
#ifdef EGORSE_HAVE_AVX2
const KernelTable& avx2_table();
#endif

}  // namespace egorse::simd
