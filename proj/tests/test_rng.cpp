#include <doctest.h>

#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "egorse/rng.hpp"
#include "egorse/sampling.hpp"

namespace {
using namespace egorse;
using linalg::Matrix;
}

TEST_SUITE_BEGIN("rng");

TEST_CASE("same seed reproduces the stream, different seed diverges") {
  Rng a(42), b(42), c(43);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    double x = a.uniform(), y = b.uniform(), z = c.uniform();
    all_equal = all_equal && (x == y);
    any_diff = any_diff || (x != z);
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("derive gives independent child streams") {
  Rng base(99);
  // consume some of the parent stream; derived children must not care
  for (int i = 0; i < 17; ++i) base.uniform();
  Rng child_a = base.derive(0);
  Rng fresh = Rng(99).derive(0);
  for (int i = 0; i < 50; ++i) CHECK(child_a.uniform() == fresh.uniform());
  // distinct salts give distinct streams
  Rng child_b = Rng(99).derive(1);
  Rng child_c = Rng(99).derive(0);
  bool diff = false;
  for (int i = 0; i < 50; ++i) diff = diff || (child_b.uniform() != child_c.uniform());
  CHECK(diff);
}

TEST_CASE("uniform_index is in range and rejects n==0") {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    std::size_t k = rng.uniform_index(7);
    CHECK(k < 7);
  }
  // small n hits every bucket
  std::set<std::size_t> seen;
  for (int i = 0; i < 200; ++i) seen.insert(rng.uniform_index(3));
  CHECK(seen.size() == 3);
  CHECK_THROWS_AS(rng.uniform_index(0), std::invalid_argument);
}

TEST_CASE("normal quantile hits tabulated values") {
  CHECK(std::fabs(norm_quantile(0.5)) < 1e-15);
  CHECK(norm_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(norm_quantile(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-12));
  CHECK(norm_quantile(0.841344746068543) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK_THROWS_AS(norm_quantile(0.0), std::invalid_argument);
  CHECK_THROWS_AS(norm_quantile(1.0), std::invalid_argument);
}

TEST_CASE("quantile and cdf are mutual inverses") {
  for (double p : {1e-9, 1e-5, 0.01, 0.2, 0.5, 0.8, 0.99, 1 - 1e-5}) {
    CHECK(norm_cdf(norm_quantile(p)) == doctest::Approx(p).epsilon(1e-9));
  }
  for (double z : {-6.0, -2.5, -1.0, 0.0, 0.5, 3.0, 6.0}) {
    CHECK(norm_quantile(norm_cdf(z)) == doctest::Approx(z).epsilon(1e-8));
  }
}

TEST_CASE("pdf value at zero") {
  CHECK(norm_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-15));
}

TEST_CASE("normal draws have the right first moments") {
  Rng rng(2024);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  double mean = s / n;
  double var = s2 / n - mean * mean;
  CHECK(std::fabs(mean) < 0.01);
  CHECK(std::fabs(var - 1.0) < 0.02);
}

TEST_CASE("latin hypercube stratifies every dimension exactly") {
  Rng rng(31);
  const std::size_t n = 23, dim = 4;
  Matrix x = latin_hypercube(n, dim, rng);
  REQUIRE(x.rows() == n);
  REQUIRE(x.cols() == dim);
  for (std::size_t j = 0; j < dim; ++j) {
    std::vector<bool> cell(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      double v = x(i, j);
      CHECK(v >= 0.0);
      CHECK(v < 1.0);
      auto c = static_cast<std::size_t>(v * n);
      CHECK_FALSE(cell[c]);  // one sample per stratum
      cell[c] = true;
    }
  }
}

TEST_CASE("latin hypercube box overload maps bounds") {
  Rng rng(32);
  std::vector<double> lo{-2.0, 1.0}, hi{2.0, 4.0};
  Matrix x = latin_hypercube(50, lo, hi, rng);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(x(i, 0) >= -2.0);
    CHECK(x(i, 0) < 2.0);
    CHECK(x(i, 1) >= 1.0);
    CHECK(x(i, 1) < 4.0);
  }
  // deterministic under the same seed
  Rng r2(32);
  Matrix y = latin_hypercube(50, lo, hi, r2);
  CHECK(x == y);
}

TEST_CASE("latin hypercube rejects bad arguments") {
  Rng rng(1);
  CHECK_THROWS(latin_hypercube(0, 2, rng));
  std::vector<double> lo{0.0}, hi{1.0, 2.0};
  CHECK_THROWS(latin_hypercube(5, lo, hi, rng));
}

TEST_SUITE_END();
