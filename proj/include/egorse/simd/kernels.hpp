#pragma once

#include <cstddef>

// Low-level array kernels behind the numerics stack. Every kernel has a
// scalar reference implementation; on x86-64 an AVX2 variant is selected at
// runtime. The two backends agree to rounding error only (different
// accumulation order); the equivalence tolerance is pinned by tests.

namespace egorse::simd {

enum class Backend { scalar, avx2 };

// Backend resolution happens once, from CPU detection plus the EGORSE_SIMD
// environment variable ("scalar", "avx2", "auto"). force_backend throws
// std::runtime_error when the requested backend is unavailable.
Backend active_backend();
void force_backend(Backend b);
void reset_backend();

double dot(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
double abs_sum(const double* a, std::size_t n);
double sqdist(const double* a, const double* b, std::size_t n);
// sum_i w[i]*(a[i]-b[i])^2, the anisotropic distance inside the GP kernel.
double weighted_sqdist(const double* a, const double* b, const double* w,
                       std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);  // y += a*x
void scale(double alpha, double* x, std::size_t n);
void sub(const double* a, const double* b, double* out, std::size_t n);
void clamp(const double* x, double lo, double hi, double* out, std::size_t n);
double max_abs_diff(const double* a, const double* b, std::size_t n);

}  // namespace egorse::simd
