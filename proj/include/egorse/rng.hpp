#pragma once

#include <cstdint>
#include <random>

namespace egorse {

// Standard normal helpers. The quantile is a rational approximation polished
// by one Halley step, accurate to ~1 ulp; all three are deterministic.
double norm_pdf(double z);
double norm_cdf(double z);
double norm_quantile(double p);  // throws outside (0, 1)

// Deterministic random stream. Every draw is derived from raw mt19937_64
// outputs (no libstdc++ distribution objects), so sequences are reproducible
// bit-for-bit across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal();                       // inverse-CDF transform
  std::uint64_t uniform_index(std::uint64_t n);  // [0, n), n >= 1

  // Child stream keyed by (base seed, salt); independent of how much this
  // stream has been consumed.
  Rng derive(std::uint64_t salt) const;
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace egorse
