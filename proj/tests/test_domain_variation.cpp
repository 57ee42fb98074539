#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "thinfb/barrier.hpp"
#include "thinfb/domain_variation.hpp"
#include "thinfb/errors.hpp"
#include "thinfb/sampling.hpp"

using namespace thinfb;

namespace {

FieldFn translate_U(double d) {
  return [d](const PointXZ& X) { return eval_U(X.xn + d, X.z); };
}

std::vector<PointXZ> ball_points(int n, double radius, int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PointXZ> pts;
  while (static_cast<int>(pts.size()) < count) {
    const auto p = ball_point(rng, n + 1, radius);
    PointXZ X;
    X.xprime.assign(p.begin(), p.begin() + (n - 1));
    X.xn = p[n - 1];
    X.z = p[n];
    pts.push_back(X);
  }
  return pts;
}

// Lattice points of B_radius at distance >= 2h from P.
std::vector<PointXZ> lattice_points(const Lattice& lat, double radius) {
  std::vector<PointXZ> pts;
  lat.for_each([&](const Index& ijk) {
    const PointXZ X = lat.point(ijk);
    const double d = X.xn <= 0.0 ? std::abs(X.z) : X.r();
    if (X.norm() <= radius && d >= 2.0 * lat.h()) pts.push_back(X);
  });
  return pts;
}

}  // namespace

// ============================================================================
// Sandwich and ordering
// ============================================================================

TEST_CASE("check_flatness_sandwich examples") {
  const Lattice lat = Lattice::box(1, 1.0 / 32, 1.0);
  const double eps = 0.05;
  const GridField u = GridField::sample(lat, [](const PointXZ& X) { return eval_U(X); });
  CHECK(check_flatness_sandwich(u, eps, Ball{{}, 1.0}));
  CHECK(check_flatness_sandwich(u, 1e-6, Ball{{}, 1.0}));
  const GridField up = GridField::sample(lat, translate_U(2.0 * eps));
  CHECK(!check_flatness_sandwich(up, eps, Ball{{}, 0.5}));
  const GridField ueps = GridField::sample(lat, translate_U(eps));
  CHECK(check_flatness_sandwich(ueps, eps, Ball{{}, 1.0}));
}

TEST_CASE("v_R is eps-flat with eps of order 1/R on B_1/2") {
  // |tilde v_R| <= |gamma_R| + C r^2/R^2 <= (1/8 + 1/2)/R + C/(4 R^2) on B_1/2
  const Lattice lat = Lattice::box(2, 1.0 / 32, 0.5);
  for (double R : {100.0, 400.0}) {
    const BarrierSpec b{2, R, 0.0};
    const GridField v = GridField::sample(lat, [&](const PointXZ& X) { return eval_vR(b, X); });
    CHECK(check_flatness_sandwich(v, 1.0 / R, Ball{{}, 0.5}));
    CHECK(!check_flatness_sandwich(v, 0.1 / R, Ball{{}, 0.5}));
  }
}

TEST_CASE("check_ordering examples") {
  const Lattice lat = Lattice::box(2, 1.0 / 32, 1.0);
  const double eps = 0.05;
  const GridField lo = GridField::sample(lat, translate_U(-eps));
  const GridField hi = GridField::sample(lat, translate_U(eps));
  CHECK(check_ordering(lo, hi, Ball{{}, 1.0}));
  CHECK(!check_ordering(hi, lo, Ball{{}, 1.0}));
  CHECK(check_ordering(hi, hi, Ball{{}, 1.0}));
  // barrier shifted down by C1/R stays below U on the closed unit ball
  const double R = 200.0, C1 = 2.5;
  const GridField v = GridField::sample(lat, [&](const PointXZ& X) { return eval_vR({2, R, -C1 / R}, X); });
  const GridField u = GridField::sample(lat, [](const PointXZ& X) { return eval_U(X); });
  CHECK(check_ordering(v, u, Ball{{}, 1.0}));
  CHECK(!check_ordering(GridField::sample(lat, [&](const PointXZ& X) { return eval_vR({2, R, 0.0}, X); }), u,
                        Ball{{}, 1.0}));
  CHECK_THROWS_AS(check_ordering(lo, GridField(Lattice::box(2, 1.0 / 16, 1.0)), Ball{{}, 1.0}),
                  std::invalid_argument);
}

// ============================================================================
// compute_variation, closed-form fields
// ============================================================================

TEST_CASE("compute_variation of U is {0} and of translates is {c}") {
  const double eps = 0.1;
  for (const auto& X : ball_points(2, 0.8, 200, 3)) {
    const auto s0 = compute_variation([](const PointXZ& Y) { return eval_U(Y); }, eps, X);
    REQUIRE(s0.values.size() == 1);
    CHECK(std::abs(s0.values[0]) <= 1e-12);
    for (double c : {-0.7, 0.3, 0.95}) {
      const auto s = compute_variation(translate_U(eps * c), eps, X);
      REQUIRE(s.values.size() == 1);
      CHECK(s.values[0] == doctest::Approx(c).epsilon(1e-12));
    }
  }
}

TEST_CASE("compute_variation of v_R matches solve_tilde_vR") {
  const double R = 100.0, eps = 4.0 / R;
  const BarrierSpec b{2, R, 0.0};
  for (const auto& X : ball_points(2, 0.5, 300, 5)) {
    const auto s = compute_variation([&](const PointXZ& Y) { return eval_vR(b, Y); }, eps, X);
    REQUIRE(s.values.size() == 1);
    CHECK(std::abs(s.values[0] - solve_tilde_vR(b, X, 1e-14) / eps) <= 1e-8);
  }
}

TEST_CASE("compute_variation returns every root of a non-monotone section") {
  const PointXZ X{{}, 0.3, 0.2};
  const double eps = 0.1, target = eval_U(X);
  // g(X - eps s e_n) - U(X) = cos(2 pi s): roots at +-1/4, +-3/4
  const FieldFn g = [&](const PointXZ& Y) { return target + std::cos(2.0 * std::numbers::pi * (X.xn - Y.xn) / eps); };
  const auto s = compute_variation(g, eps, X);
  REQUIRE(s.values.size() == 4);
  const double expect[4] = {-0.75, -0.25, 0.25, 0.75};
  for (int i = 0; i < 4; ++i) CHECK(s.values[i] == doctest::Approx(expect[i]).epsilon(1e-12));
  for (double w : s.values) CHECK(std::abs(g(X.shifted(-eps * w)) - target) <= 1e-10);
}

TEST_CASE("compute_variation errors") {
  CHECK_THROWS_AS(compute_variation(translate_U(0.0), 0.1, PointXZ{{}, -0.2, 0.0}), SingularPointError);
  CHECK_THROWS_AS(compute_variation(translate_U(0.3), 0.1, PointXZ{{}, 0.2, 0.1}), BracketError);
  const Lattice lat = Lattice::box(1, 1.0 / 16, 0.5);
  const GridField u = GridField::sample(lat, [](const PointXZ& Y) { return eval_U(Y); });
  CHECK_THROWS_AS(compute_variation(u, 0.1, PointXZ{{}, -0.25, 0.0}), SingularPointError);
  CHECK_THROWS_AS(compute_variation(u, 0.1, PointXZ{{}, 0.4375, 0.0625}), StencilError);
  CHECK_THROWS_AS(compute_variation(u, 0.1, PointXZ{{}, 0.1, 0.03}), StencilError);
}

// ============================================================================
// Rotated profile oracle
// ============================================================================

TEST_CASE("oracle_variation_rotated special cases") {
  const PointXZ X{{0.2}, 0.3, 0.1};
  CHECK(oracle_variation_rotated({0.0}, 0.0, 0.1, X) == 0.0);
  CHECK(oracle_variation_rotated({0.0}, 0.4, 0.1, X) == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(oracle_variation_rotated({}, 0.4, 0.1, PointXZ{{}, 0.3, 0.1}) == doctest::Approx(-0.2).epsilon(1e-15));
  const Direction d = rotated_direction({3.0, 4.0}, 0.1);
  CHECK(d.nu_prime[0] * d.nu_prime[0] + d.nu_prime[1] * d.nu_prime[1] + d.nu_n * d.nu_n ==
        doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("compute_variation on the rotated profile matches the closed form to 1e-8") {
  const double eps = 0.05, rho = 0.5;
  const std::vector<double> a0{0.8};
  const FieldFn u = rotated_profile(a0, rho, eps);
  int checked = 0;
  for (const auto& X : ball_points(2, rho, 500, 9)) {
    const double w = oracle_variation_rotated(a0, rho, eps, X);
    if (std::abs(w) > 1.0) continue;
    const auto s = compute_variation(u, eps, X);
    REQUIRE(s.values.size() == 1);
    CHECK(std::abs(s.values[0] - w) <= 1e-8);
    ++checked;
  }
  CHECK(checked > 400);
}

// ============================================================================
// Lattice fields
// ============================================================================

TEST_CASE("section_value reproduces nodes and is monotone between them") {
  const Lattice lat = Lattice::box(1, 1.0 / 16, 1.0);
  const GridField u = GridField::sample(lat, [](const PointXZ& Y) { return eval_U(Y); });
  for (double z : {0.0, 0.125, -0.5}) {
    double prev = -1.0;
    for (int i = -160; i <= 160; ++i) {
      const PointXZ X{{}, i / 160.0, z};
      const double v = section_value(u, X);
      CHECK(v >= prev - 1e-15);
      prev = v;
      if (i % 10 == 0) CHECK(v == doctest::Approx(eval_U(X)).epsilon(1e-14).scale(1e-14));
    }
  }
}

TEST_CASE("lattice variations of translates, translation rule, and range") {
  const Lattice lat = Lattice::box(1, 1.0 / 64, 1.0);
  const double eps = 0.1;
  const auto pts = lattice_points(lat, 0.5);
  const GridField u = GridField::sample(lat, [](const PointXZ& Y) { return eval_U(Y); });
  const auto base = compute_variations(u, eps, pts);
  REQUIRE(base.size() == pts.size());
  for (const auto& s : base) {
    REQUIRE(s.values.size() == 1);
    CHECK(std::abs(s.values[0]) <= 1e-12);  // nodes are exact
  }
  for (double t : {-0.4, 0.25}) {
    const GridField ut = GridField::sample(lat, translate_U(eps * t));
    const auto vt = compute_variations(ut, eps, pts);
    REQUIRE(vt.size() == base.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < vt.size(); ++i) {
      REQUIRE(vt[i].values.size() == 1);
      CHECK(vt[i].values[0] >= -1.0);
      CHECK(vt[i].values[0] <= 1.0);
      worst = std::max(worst, std::abs(vt[i].values[0] - (base[i].values[0] + t)));
    }
    // interpolation error of PCHIP next to the square-root edge, in units of eps
    CHECK(worst <= 2e-3);
  }
}

TEST_CASE("lattice variation of v_R follows solve_tilde_vR to interpolation tolerance") {
  const Lattice lat = Lattice::box(2, 1.0 / 32, 1.0);
  const double R = 50.0, eps = 4.0 / R;
  const BarrierSpec b{2, R, 0.0};
  const GridField v = GridField::sample(lat, [&](const PointXZ& X) { return eval_vR(b, X); });
  double worst = 0.0;
  for (const auto& s : compute_variations(v, eps, lattice_points(lat, 0.5))) {
    REQUIRE(!s.values.empty());
    worst = std::max(worst, std::abs(s.values.front() - solve_tilde_vR(b, s.X) / eps));
  }
  CHECK(worst <= 2e-3);
}

TEST_CASE("comparison transfer on sampled pairs") {
  const Lattice lat = Lattice::box(2, 1.0 / 32, 1.0);
  const double eps = 0.1;
  const GridField g1 = GridField::sample(lat, translate_U(-0.3 * eps));
  const GridField g2 = GridField::sample(lat, [&](const PointXZ& X) { return eval_vR({2, 100.0, 0.4 * eps}, X); });
  REQUIRE(check_ordering(g1, g2, Ball{{}, 1.0}));
  const auto pts = lattice_points(lat, 1.0 - eps);
  const auto s1 = compute_variations(g1, eps, pts);
  const auto s2 = compute_variations(g2, eps, pts);
  REQUIRE(s1.size() == s2.size());
  for (std::size_t i = 0; i < s1.size(); ++i) CHECK(s1[i].values.front() <= s2[i].values.back() + 1e-9);
}

TEST_CASE("serial and parallel batches agree") {
  const Lattice lat = Lattice::box(2, 1.0 / 16, 1.0);
  const GridField v = GridField::sample(lat, [](const PointXZ& X) { return eval_vR({2, 40.0, 0.0}, X); });
  const auto pts = lattice_points(lat, 0.75);
  const auto a = compute_variations(v, 0.1, pts, 1e-10, false);
  const auto b = compute_variations(v, 0.1, pts, 1e-10, true);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].values == b[i].values);
}

// ============================================================================
// Envelopes
// ============================================================================

TEST_CASE("envelopes of constant variations") {
  const double eps = 0.1;
  const auto pts = ball_points(2, 0.5, 4000, 11);
  const auto balls = dyadic_balls(PointXZ{{0.0}, 0.0, 0.0}, 0.5, 0.5, 4);
  for (double c : {0.0, 0.35}) {
    const auto rows = build_envelopes(compute_variations(translate_U(eps * c), eps, pts), balls);
    REQUIRE(rows.size() == 4);
    for (const auto& r : rows) {
      REQUIRE(r.count > 0);
      CHECK(std::abs(r.a - c) <= 1e-9);
      CHECK(std::abs(r.b - c) <= 1e-9);
    }
  }
  const auto far = build_envelopes({}, balls);
  CHECK(far[0].count == 0);
  std::ostringstream os;
  write_envelope_csv(os, far);
  CHECK(os.str().find("scale,center,radius,count,a,b,b_minus_a\n") == 0);
  CHECK(os.str().find("excluded") != std::string::npos);
}

TEST_CASE("envelopes of a mixed field nest across scales") {
  const double R = 30.0, eps = 0.1;
  const BarrierSpec b{2, R, 0.0};
  const auto samples = compute_variations([&](const PointXZ& X) { return eval_vR(b, X); }, eps,
                                          ball_points(2, 0.5, 2000, 13));
  const auto rows = build_envelopes(samples, dyadic_balls(PointXZ{{0.0}, 0.0, 0.0}, 0.5, 0.5, 4));
  for (std::size_t m = 0; m < rows.size(); ++m) {
    REQUIRE(rows[m].count > 0);
    CHECK(rows[m].a <= rows[m].b);
    if (m > 0) {
      CHECK(rows[m].a >= rows[m - 1].a);
      CHECK(rows[m].b <= rows[m - 1].b);
    }
  }
  CHECK(rows.front().width() > rows.back().width());
  const EnvelopePair p = pointwise_envelopes(samples);
  CHECK(p.points.size() == samples.size());
  for (std::size_t i = 0; i < p.a_eps.size(); ++i) CHECK(p.a_eps[i] <= p.b_eps[i]);
}
