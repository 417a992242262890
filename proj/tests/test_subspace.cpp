#include "egorse/subspace.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "egorse/embeddings.hpp"
#include "egorse/linalg.hpp"
#include "egorse/rng.hpp"

namespace {

using egorse::Rng;
using egorse::linalg::Matrix;
using namespace egorse::subspace;

egorse::embeddings::TransferMatrix make_transfer(std::size_t de, std::size_t d,
                                                 std::initializer_list<double> vals) {
  egorse::embeddings::TransferMatrix tm;
  tm.entries = Matrix(de, d);
  tm.d = d;
  tm.d_e = de;
  tm.method_tag = "manual";
  tm.seed = 0;
  std::size_t idx = 0;
  for (double v : vals) {
    tm.entries(idx / d, idx % d) = v;
    ++idx;
  }
  REQUIRE(idx == de * d);
  return tm;
}

std::vector<double> image_of(const Matrix& a, const std::vector<double>& x) {
  std::vector<double> y(a.rows());
  egorse::linalg::matvec(a, x.data(), y.data());
  return y;
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

std::vector<double> random_box_point(std::size_t d, Rng& rng) {
  std::vector<double> x(d);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  return x;
}

// Exact projection oracle for d=3, d_e=1. The feasible set {a.x = u} cut by
// the box is a planar polygon; when the min-norm preimage lies outside the
// box the projection sits on the polygon boundary, and every boundary piece
// is a segment on a box face. Each segment is searched with a 1-D two-stage
// grid, where convexity makes the grid argmin accurate to the fine step.
std::vector<double> polygon_projection_oracle(const std::vector<double>& a, double u,
                                              const std::vector<double>& target) {
  const double feas_slack = 1e-12;
  auto objective = [&](const std::vector<double>& x) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += (x[i] - target[i]) * (x[i] - target[i]);
    return s;
  };

  double best_obj = std::numeric_limits<double>::infinity();
  std::vector<double> best_x(3, 0.0);

  bool target_feasible = true;
  for (int i = 0; i < 3; ++i) {
    if (std::fabs(target[i]) > 1.0 + feas_slack) target_feasible = false;
  }
  if (target_feasible) return target;

  // face k at level s, parametrized by free coordinate i, solved for j
  for (int k = 0; k < 3; ++k) {
    for (int s = -1; s <= 1; s += 2) {
      const double rhs0 = u - a[k] * s;
      int others[2] = {(k + 1) % 3, (k + 2) % 3};
      for (int pi = 0; pi < 2; ++pi) {
        const int i = others[pi];
        const int j = others[1 - pi];
        if (std::fabs(a[j]) < 1e-15) continue;
        auto eval_at = [&](double xi, std::vector<double>& x) {
          x[k] = s;
          x[i] = xi;
          x[j] = (rhs0 - a[i] * xi) / a[j];
          if (std::fabs(x[j]) > 1.0 + feas_slack) return false;
          return true;
        };
        std::vector<double> x(3);
        double coarse_best = std::numeric_limits<double>::infinity();
        double coarse_xi = 0.0;
        const int n_coarse = 20001;
        for (int g = 0; g < n_coarse; ++g) {
          const double xi = -1.0 + 2.0 * g / (n_coarse - 1);
          if (!eval_at(xi, x)) continue;
          const double o = objective(x);
          if (o < coarse_best) {
            coarse_best = o;
            coarse_xi = xi;
          }
        }
        if (!std::isfinite(coarse_best)) continue;
        const double half = 2.5e-4;
        const int n_fine = 50001;
        for (int g = 0; g < n_fine; ++g) {
          double xi = coarse_xi - half + 2.0 * half * g / (n_fine - 1);
          xi = std::max(-1.0, std::min(1.0, xi));
          if (!eval_at(xi, x)) continue;
          const double o = objective(x);
          if (o < best_obj) {
            best_obj = o;
            best_x = x;
          }
        }
      }
    }
  }
  REQUIRE(std::isfinite(best_obj));
  return best_x;
}

}  // namespace

TEST_SUITE("subspace") {

TEST_CASE("bounds are row absolute sums") {
  auto tm = make_transfer(2, 2, {1.0, -2.0, 0.5, 0.5});
  Subspace sub = compute_bounds(tm);
  CHECK(sub.bounds[0] == 3.0);
  CHECK(sub.bounds[1] == 1.0);
}

TEST_CASE("hash bounds count hashed columns") {
  Rng rng(404);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng r(900 + seed);
    auto tm = egorse::embeddings::hash_embedding(23, 4, r);
    Subspace sub = compute_bounds(tm);
    for (std::size_t i = 0; i < 4; ++i) {
      double count = 0.0;
      for (std::size_t j = 0; j < 23; ++j) count += std::fabs(tm.entries(i, j));
      CHECK(sub.bounds[i] == count);
      CHECK(sub.bounds[i] >= 1.0);
    }
  }
}

TEST_CASE("pseudo-inverse is a right inverse") {
  const std::size_t dims[] = {10, 25, 60};
  const std::size_t de_list[] = {1, 2, 4};
  for (int c = 0; c < 3; ++c) {
    Rng rng(1000 + c);
    auto tm = egorse::embeddings::gaussian_embedding(dims[c], de_list[c], rng);
    Subspace sub = compute_bounds(tm);
    Matrix prod = egorse::linalg::matmul(tm.entries, sub.pseudo_inverse);
    for (std::size_t i = 0; i < de_list[c]; ++i) {
      for (std::size_t j = 0; j < de_list[c]; ++j) {
        CHECK(std::fabs(prod(i, j) - (i == j ? 1.0 : 0.0)) < 1e-8);
      }
    }
    CHECK(sub.aat_lmax > 0.0);
  }
}

TEST_CASE("dependent rows are rejected with the combination named") {
  auto tm = make_transfer(2, 4, {1.0, -0.5, 2.0, 0.25, 2.0, -1.0, 4.0, 0.5});
  CHECK_THROWS_WITH_AS(compute_bounds(tm), doctest::Contains("row"),
                       std::runtime_error);
}

TEST_CASE("image of the box is contained in B") {
  Rng g(77);
  auto gauss = egorse::embeddings::gaussian_embedding(30, 3, g);
  Rng h(78);
  auto hash = egorse::embeddings::hash_embedding(50, 4, h);
  for (const auto* tm : {&gauss, &hash}) {
    Subspace sub = compute_bounds(*tm);
    Rng rng(500);
    for (int rep = 0; rep < 2000; ++rep) {
      auto x = random_box_point(tm->d, rng);
      auto u = image_of(tm->entries, x);
      for (std::size_t i = 0; i < tm->d_e; ++i) {
        CHECK(std::fabs(u[i]) <= sub.bounds[i] + 1e-12);
      }
    }
  }
}

TEST_CASE("constructed images are members with valid certificates") {
  Rng init(2024);
  auto tm = egorse::embeddings::gaussian_embedding(18, 3, init);
  Subspace sub = compute_bounds(tm);
  Rng rng(321);
  for (int rep = 0; rep < 50; ++rep) {
    auto x = random_box_point(18, rng);
    auto u = image_of(tm.entries, x);
    MembershipResult m = membership(sub, u);
    CHECK(m.is_member);
    REQUIRE(m.certificate.has_value());
    const auto& c = *m.certificate;
    for (double v : c) CHECK(std::fabs(v) <= 1.0 + 1e-12);
    auto uc = image_of(tm.entries, c);
    double res = 0.0;
    for (std::size_t i = 0; i < 3; ++i) res += (uc[i] - u[i]) * (uc[i] - u[i]);
    CHECK(std::sqrt(res) == doctest::Approx(m.residual).epsilon(1e-6));
    CHECK(m.residual <= 1e-6 * std::sqrt(3.0));
  }
}

TEST_CASE("corner of B is attained for a single row") {
  auto tm = make_transfer(1, 3, {0.3, -1.2, 0.7});
  Subspace sub = compute_bounds(tm);
  CHECK(sub.bounds[0] == doctest::Approx(2.2).epsilon(1e-15));

  std::vector<double> corner{2.2};
  MembershipResult m = membership(sub, corner);
  CHECK(m.is_member);
  REQUIRE(m.certificate.has_value());
  CHECK((*m.certificate)[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK((*m.certificate)[1] == doctest::Approx(-1.0).epsilon(1e-5));
  CHECK((*m.certificate)[2] == doctest::Approx(1.0).epsilon(1e-5));

  std::vector<double> outside{2.3};
  MembershipResult out = membership(sub, outside);
  CHECK(!out.is_member);
  CHECK(out.residual > 0.05);
  CHECK(!out.certificate.has_value());
}

TEST_CASE("two-dimensional slice geometry") {
  auto tm = make_transfer(1, 2, {1.0, 1.0});
  Subspace sub = compute_bounds(tm);
  CHECK(sub.bounds[0] == 2.0);

  std::vector<double> u{1.9};
  CHECK(membership(sub, u).is_member);
  auto gb = gamma_b(sub, u);
  CHECK(gb[0] == doctest::Approx(0.95).epsilon(1e-9));
  CHECK(gb[1] == doctest::Approx(0.95).epsilon(1e-9));

  std::vector<double> edge{2.0};
  auto gb_edge = gamma_b(sub, edge);
  CHECK(gb_edge[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(gb_edge[1] == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("gamma_b leaves a feasible min-norm preimage unchanged") {
  Rng init(99);
  auto tm = egorse::embeddings::gaussian_embedding(20, 2, init);
  Subspace sub = compute_bounds(tm);
  Rng rng(55);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x(20);
    for (auto& v : x) v = rng.uniform(-0.05, 0.05);
    auto u = image_of(tm.entries, x);
    std::vector<double> pinv_u(20);
    for (std::size_t j = 0; j < 20; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 2; ++k) s += sub.pseudo_inverse(j, k) * u[k];
      pinv_u[j] = s;
    }
    bool inside = true;
    for (double v : pinv_u) inside = inside && std::fabs(v) <= 1.0;
    REQUIRE(inside);
    auto gb = gamma_b(sub, u);
    CHECK(max_abs_diff(gb, pinv_u) < 1e-9);
  }
}

TEST_CASE("gamma_b round trip on random members") {
  Rng init(4242);
  auto tm = egorse::embeddings::gaussian_embedding(20, 2, init);
  Subspace sub = compute_bounds(tm);
  Rng rng(808);
  for (int rep = 0; rep < 200; ++rep) {
    auto x = random_box_point(20, rng);
    auto u = image_of(tm.entries, x);
    auto gb = gamma_b(sub, u);
    for (double v : gb) CHECK(std::fabs(v) <= 1.0);
    auto back = image_of(tm.entries, gb);
    double res = 0.0;
    for (std::size_t i = 0; i < 2; ++i) res += (back[i] - u[i]) * (back[i] - u[i]);
    CHECK(std::sqrt(res) <= 1e-8);
  }
}

TEST_CASE("gamma_b is deterministic") {
  Rng init(31);
  auto tm = egorse::embeddings::gaussian_embedding(12, 2, init);
  Subspace sub = compute_bounds(tm);
  Rng rng(32);
  auto x = random_box_point(12, rng);
  auto u = image_of(tm.entries, x);
  auto a = gamma_b(sub, u);
  auto b = gamma_b(sub, u);
  CHECK(a == b);
}

TEST_CASE("gamma_b rejects non-members") {
  auto tm = make_transfer(1, 3, {0.3, -1.2, 0.7});
  Subspace sub = compute_bounds(tm);
  std::vector<double> outside{2.3};
  CHECK_THROWS_AS((void)gamma_b(sub, outside), std::invalid_argument);
}

TEST_CASE("gamma_b matches the polygon projection oracle") {
  struct Case {
    std::vector<double> a;
    double u;
  };
  const Case cases[] = {
      {{2.0, 0.1, 0.1}, 2.1},
      {{1.5, -0.4, 0.2}, 1.9},
      {{-1.8, 0.9, 0.3}, -2.5},
      {{2.0, 0.1, 0.1}, -2.05},
      {{1.1, 0.9, -1.3}, 3.1},
  };
  for (const auto& c : cases) {
    auto tm = make_transfer(1, 3, {c.a[0], c.a[1], c.a[2]});
    Subspace sub = compute_bounds(tm);
    std::vector<double> u{c.u};
    REQUIRE(membership(sub, u).is_member);
    std::vector<double> target(3);
    for (int j = 0; j < 3; ++j) target[j] = sub.pseudo_inverse(j, 0) * c.u;
    auto oracle = polygon_projection_oracle(c.a, c.u, target);
    auto gb = gamma_b(sub, u);
    CHECK(max_abs_diff(gb, oracle) < 1e-4);
  }
}

TEST_CASE("gamma_w clamps the min-norm preimage") {
  auto tm = make_transfer(3, 3, {1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0});
  Subspace sub = compute_bounds(tm);
  std::vector<double> u{1.5, 0.2, -3.0};
  auto gw = gamma_w(sub, u);
  CHECK(gw[0] == 1.0);
  CHECK(gw[1] == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(gw[2] == -1.0);
}

TEST_CASE("gamma_w matches a projected-gradient oracle") {
  Rng init(606);
  auto tm = egorse::embeddings::gaussian_embedding(15, 3, init);
  Subspace sub = compute_bounds(tm);

  // independent pseudo-inverse path for the oracle
  Matrix at = egorse::linalg::transpose(tm.entries);
  Matrix aat = egorse::linalg::matmul(tm.entries, at);
  Matrix aat_inv = egorse::linalg::small_inverse(aat);
  Matrix pinv_alt = egorse::linalg::matmul(at, aat_inv);

  Rng rng(607);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> u(3);
    for (std::size_t i = 0; i < 3; ++i) u[i] = rng.uniform(-1.5, 1.5) * sub.bounds[i];

    std::vector<double> p(15);
    for (std::size_t j = 0; j < 15; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += pinv_alt(j, k) * u[k];
      p[j] = s;
    }
    // projected gradient on ||x - p||^2 from the origin converges to the clamp
    std::vector<double> x(15, 0.0);
    for (int it = 0; it < 600; ++it) {
      for (std::size_t j = 0; j < 15; ++j) {
        double xn = x[j] - 0.2 * (x[j] - p[j]);
        x[j] = std::max(-1.0, std::min(1.0, xn));
      }
    }
    auto gw = gamma_w(sub, u);
    CHECK(max_abs_diff(gw, x) < 1e-10);
  }
}

TEST_CASE("reduced constraint values") {
  auto tm = make_transfer(1, 3, {0.3, -1.2, 0.7});
  Subspace sub = compute_bounds(tm);

  std::vector<double> origin{0.0};
  CHECK(reduced_constraint(sub, origin) == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<double> corner{2.2};
  CHECK(std::fabs(reduced_constraint(sub, corner)) < 1e-8);
}

TEST_CASE("reduced constraint on non-members uses scaled coordinates") {
  // nearly parallel rows make a u with small scaled coordinates infeasible
  auto tm = make_transfer(2, 3, {1.0, 1.0, 1.0, 1.0, 1.0, 0.999});
  Subspace sub = compute_bounds(tm);
  CHECK(sub.bounds[0] == 3.0);
  CHECK(sub.bounds[1] == doctest::Approx(2.999).epsilon(1e-15));

  std::vector<double> u{1.5, -1.4995};
  REQUIRE(!membership(sub, u).is_member);
  CHECK(reduced_constraint(sub, u) == doctest::Approx(-0.5).epsilon(1e-9));

  // the literal formula ranges below -1 for far-out u
  std::vector<double> far{0.9 * 3.0, -0.9 * 2.999};
  REQUIRE(!membership(sub, far).is_member);
  CHECK(reduced_constraint(sub, far) == doctest::Approx(-1.62).epsilon(1e-9));
}

TEST_CASE("constraint sign certifies membership") {
  Rng init(717);
  auto gauss = egorse::embeddings::gaussian_embedding(12, 2, init);
  Rng hinit(718);
  auto hash = egorse::embeddings::hash_embedding(16, 2, hinit);
  for (const auto* tm : {&gauss, &hash}) {
    Subspace sub = compute_bounds(*tm);
    Rng rng(719);
    int members = 0;
    for (int rep = 0; rep < 300; ++rep) {
      std::vector<double> u(2);
      for (std::size_t i = 0; i < 2; ++i) u[i] = rng.uniform(-1.3, 1.3) * sub.bounds[i];
      const bool is_m = membership(sub, u).is_member;
      const double g = reduced_constraint(sub, u);
      CHECK((g >= 0.0) == is_m);
      members += is_m ? 1 : 0;
    }
    // the sweep has to exercise both branches to mean anything
    CHECK(members > 20);
    CHECK(members < 280);
  }
}

TEST_CASE("backward map is injective on members") {
  Rng init(846);
  auto tm = egorse::embeddings::gaussian_embedding(14, 2, init);
  Subspace sub = compute_bounds(tm);
  Rng rng(847);
  for (int rep = 0; rep < 25; ++rep) {
    auto x1 = random_box_point(14, rng);
    auto x2 = random_box_point(14, rng);
    auto u1 = image_of(tm.entries, x1);
    auto u2 = image_of(tm.entries, x2);
    double du = 0.0;
    for (std::size_t i = 0; i < 2; ++i) du = std::max(du, std::fabs(u1[i] - u2[i]));
    if (du < 1e-3) continue;
    auto g1 = gamma_b(sub, u1);
    auto g2 = gamma_b(sub, u2);
    CHECK(max_abs_diff(g1, g2) > 1e-12);
  }
}

TEST_CASE("reduced objective calls f exactly once") {
  Rng init(11);
  auto tm = egorse::embeddings::gaussian_embedding(10, 2, init);
  Subspace sub = compute_bounds(tm);

  int calls = 0;
  auto f = [&](const double* x) {
    ++calls;
    double s = 0.0;
    for (int j = 0; j < 10; ++j) s += x[j];
    return s;
  };

  Rng rng(12);
  auto x = random_box_point(10, rng);
  auto u = image_of(tm.entries, x);
  REQUIRE(membership(sub, u).is_member);
  calls = 0;
  ReducedEval ev = reduced_objective(sub, f, u.data());
  CHECK(calls == 1);
  CHECK(ev.used_map == 'B');
  CHECK(!ev.non_finite);
  auto gb = gamma_b(sub, u);
  CHECK(max_abs_diff(ev.full_point, gb) < 1e-12);
  double expect = 0.0;
  for (double v : gb) expect += v;
  CHECK(ev.value == doctest::Approx(expect).epsilon(1e-12));

  // non-member falls back to the total map
  std::vector<double> outside{sub.bounds[0] * 1.5, -sub.bounds[1] * 1.5};
  REQUIRE(!membership(sub, outside).is_member);
  calls = 0;
  ReducedEval ev_w = reduced_objective(sub, f, outside.data());
  CHECK(calls == 1);
  CHECK(ev_w.used_map == 'W');
  auto gw = gamma_w(sub, outside);
  CHECK(max_abs_diff(ev_w.full_point, gw) < 1e-12);
}

TEST_CASE("non-finite objective values are surfaced") {
  Rng init(13);
  auto tm = egorse::embeddings::gaussian_embedding(8, 2, init);
  Subspace sub = compute_bounds(tm);
  Rng rng(14);
  auto x = random_box_point(8, rng);
  auto u = image_of(tm.entries, x);

  auto f_nan = [](const double*) { return std::numeric_limits<double>::quiet_NaN(); };
  ReducedEval ev = reduced_objective(sub, f_nan, u.data());
  CHECK(ev.non_finite);
  CHECK(std::isnan(ev.value));
  CHECK(ev.full_point.size() == 8);

  auto f_inf = [](const double*) { return std::numeric_limits<double>::infinity(); };
  ReducedEval ev2 = reduced_objective(sub, f_inf, u.data());
  CHECK(ev2.non_finite);
  CHECK(std::isinf(ev2.value));
}

TEST_CASE("evaluate_candidate agrees with the standalone operations") {
  Rng init(909);
  auto tm = egorse::embeddings::gaussian_embedding(12, 3, init);
  Subspace sub = compute_bounds(tm);
  Rng rng(910);

  auto x = random_box_point(12, rng);
  auto u = image_of(tm.entries, x);
  Candidate cm = evaluate_candidate(sub, u.data());
  CHECK(cm.membership.is_member);
  CHECK(cm.used_map == 'B');
  CHECK(max_abs_diff(cm.mapped, gamma_b(sub, u)) < 1e-12);
  CHECK(cm.constraint == doctest::Approx(reduced_constraint(sub, u)).epsilon(1e-12));

  std::vector<double> far(3);
  for (std::size_t i = 0; i < 3; ++i) far[i] = sub.bounds[i] * 1.4;
  REQUIRE(!membership(sub, far).is_member);
  Candidate cw = evaluate_candidate(sub, far.data());
  CHECK(cw.used_map == 'W');
  CHECK(max_abs_diff(cw.mapped, gamma_w(sub, far)) < 1e-12);
  CHECK(cw.constraint == doctest::Approx(reduced_constraint(sub, far)).epsilon(1e-12));
}

TEST_CASE("dimension mismatches throw") {
  Rng init(21);
  auto tm = egorse::embeddings::gaussian_embedding(6, 2, init);
  Subspace sub = compute_bounds(tm);
  std::vector<double> bad{0.0, 0.0, 0.0};
  CHECK_THROWS_AS((void)membership(sub, bad), std::invalid_argument);
  CHECK_THROWS_AS((void)gamma_b(sub, bad), std::invalid_argument);
  CHECK_THROWS_AS((void)gamma_w(sub, bad), std::invalid_argument);
  CHECK_THROWS_AS((void)reduced_constraint(sub, bad), std::invalid_argument);
}

}  // TEST_SUITE
