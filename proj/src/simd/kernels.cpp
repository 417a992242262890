#include "egorse/simd/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

#include "kernel_table.hpp"

namespace egorse::simd {

namespace {

bool avx2_available() {
#if defined(EGORSE_HAVE_AVX2) && defined(__x86_64__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable* pick(Backend b) {
#ifdef EGORSE_HAVE_AVX2
  if (b == Backend::avx2) return &avx2_table();
#endif
  (void)b;
  return &scalar_table();
}

Backend detect() {
  if (const char* env = std::getenv("EGORSE_SIMD")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0) {
      if (!avx2_available())
        throw std::runtime_error("EGORSE_SIMD=avx2 but AVX2 is unavailable");
      return Backend::avx2;
    }
    // anything else (including "auto") falls through to detection
  }
  return avx2_available() ? Backend::avx2 : Backend::scalar;
}

// Resolved once on first use; force/reset swap it (test hook, not intended
// to race against concurrent kernel calls).
struct Dispatch {
  Backend backend;
  const KernelTable* table;
  Dispatch() : backend(detect()), table(pick(backend)) {}
};

Dispatch& dispatch() {
  static Dispatch d;
  return d;
}

}  // namespace

Backend active_backend() { return dispatch().backend; }

void force_backend(Backend b) {
  if (b == Backend::avx2 && !avx2_available())
    throw std::runtime_error("AVX2 backend unavailable on this machine");
  dispatch().backend = b;
  dispatch().table = pick(b);
}

void reset_backend() {
  dispatch().backend = detect();
  dispatch().table = pick(dispatch().backend);
}

double dot(const double* a, const double* b, std::size_t n) {
  return dispatch().table->dot(a, b, n);
}
double sum(const double* a, std::size_t n) { return dispatch().table->sum(a, n); }
double abs_sum(const double* a, std::size_t n) {
  return dispatch().table->abs_sum(a, n);
}
double sqdist(const double* a, const double* b, std::size_t n) {
  return dispatch().table->sqdist(a, b, n);
}
double weighted_sqdist(const double* a, const double* b, const double* w,
                       std::size_t n) {
  return dispatch().table->weighted_sqdist(a, b, w, n);
}
void axpy(double alpha, const double* x, double* y, std::size_t n) {
  dispatch().table->axpy(alpha, x, y, n);
}
void scale(double alpha, double* x, std::size_t n) {
  dispatch().table->scale(alpha, x, n);
}
void sub(const double* a, const double* b, double* out, std::size_t n) {
  dispatch().table->sub(a, b, out, n);
}
void clamp(const double* x, double lo, double hi, double* out, std::size_t n) {
  dispatch().table->clamp(x, lo, hi, out, n);
}
double max_abs_diff(const double* a, const double* b, std::size_t n) {
  return dispatch().table->max_abs_diff(a, b, n);
}

}  // namespace egorse::simd
