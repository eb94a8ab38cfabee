#include <cmath>

#include "doctest.h"
#include "rmps/dynamics.hpp"

using namespace rmps;

TEST_CASE("henon_step examples") {
  const Point2 z = henon_step({0.0, 0.0}, {0.37, -0.8});
  CHECK(z.x == 1.0);
  CHECK(z.y == 0.0);

  const Point2 q = henon_step({1.0, 1.0}, {1.4, 0.3});
  CHECK(q.x == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(q.y == doctest::Approx(0.3).epsilon(1e-15));

  // Two steps from (1, 0) with (a, b) = (0.3, 0.5), iterated by hand.
  const HenonParams p{0.3, 0.5};
  Point2 s{1.0, 0.0};
  s = henon_step(s, p);
  CHECK(s.x == doctest::Approx(0.7));
  CHECK(s.y == doctest::Approx(0.5));
  s = henon_step(s, p);
  CHECK(s.x == doctest::Approx(1.353));
  CHECK(s.y == doctest::Approx(0.35));
}

TEST_CASE("henon Jacobian determinant equals -b") {
  Rng rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Point2 s{u(rng), u(rng)};
    const HenonParams p{u(rng), u(rng)};
    const double h = 1e-6;
    const Point2 xp = henon_step({s.x + h, s.y}, p), xm = henon_step({s.x - h, s.y}, p);
    const Point2 yp = henon_step({s.x, s.y + h}, p), ym = henon_step({s.x, s.y - h}, p);
    const double j11 = (xp.x - xm.x) / (2 * h), j21 = (xp.y - xm.y) / (2 * h);
    const double j12 = (yp.x - ym.x) / (2 * h), j22 = (yp.y - ym.y) / (2 * h);
    CHECK(std::abs(j11 * j22 - j12 * j21 + p.b) < 1e-5);
  }
}

TEST_CASE("henon_trajectory") {
  SUBCASE("bounded orbit keeps every iterate") {
    const HenonParams p{0.2, 0.5};
    const auto t = henon_trajectory({0.0, 0.0}, p, 250);
    REQUIRE(t.size() == 251);
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
      CHECK(std::isfinite(t[i].x));
      const Point2 next = henon_step(t[i], p);
      CHECK(next == t[i + 1]);
    }
  }
  SUBCASE("single step") {
    const auto t = henon_trajectory({0.0, 0.0}, {0.3, 0.3}, 1);
    REQUIRE(t.size() == 2);
    CHECK(t[0] == Point2{0.0, 0.0});
    CHECK(t[1] == Point2{1.0, 0.0});
  }
  SUBCASE("divergent orbit is truncated before leaving the escape box") {
    const HenonParams p{0.45, 1.1};
    const auto t = henon_trajectory({100.0, 100.0}, p, 250, 1e6);
    REQUIRE(!t.empty());
    CHECK(t.size() < 251);
    for (const auto& q : t) {
      CHECK(std::isfinite(q.x));
      CHECK(std::abs(q.x) <= 1e6);
      CHECK(std::abs(q.y) <= 1e6);
    }
    // The next iterate is the one that escaped.
    const Point2 next = henon_step(t.back(), p);
    CHECK((!std::isfinite(next.x) || std::abs(next.x) > 1e6 || std::abs(next.y) > 1e6));
  }
  CHECK_THROWS_AS(henon_trajectory({0, 0}, {0.3, 0.3}, 0), InvalidArgument);
  CHECK_THROWS_AS(henon_trajectory({0, 0}, {0.3, 0.3}, 5, 0.0), InvalidArgument);
}

TEST_CASE("sam_vector_field examples") {
  const SamState d = sam_vector_field({1.0, 0.0, 0.0, 0.0}, {2.0});
  CHECK(d.r == 0.0);
  CHECK(d.phi == 0.0);
  CHECK(d.p_r == doctest::Approx(-1.0));
  CHECK(d.p_phi == 0.0);

  const SamState e = sam_vector_field({1.0, 0.0, 1.0, 1.0}, {3.0});
  CHECK(e.r == doctest::Approx(0.25));
  CHECK(e.phi == doctest::Approx(1.0));
  CHECK(e.p_r == doctest::Approx(-1.0));
  CHECK(e.p_phi == 0.0);

  for (double r : {0.01, 0.3, 2.0, 7.0}) CHECK(sam_vector_field({r, 0.0, 0.4, -0.2}, {5.0}).p_phi == 0.0);

  CHECK_THROWS_AS(sam_vector_field({1e-3, 0.0, 0.0, 0.1}, {3.0}), SingularityReached);
  CHECK_THROWS_AS(sam_vector_field({0.5, 0.0, 0.0, 0.1}, {3.0}, 0.6), SingularityReached);
}

TEST_CASE("sam_energy examples") {
  CHECK(sam_energy({1.0, 0.0, 0.0, 0.0}, {2.0}) == doctest::Approx(1.0));
  for (double mu : {1.5, 3.0, 8.25, 15.0})
    CHECK(sam_energy({1.0 / (mu - 1.0), 0.0, 0.0, 0.0}, {mu}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(sam_energy({0.5, 0.0, 2.0, 1.0}, {3.0}) == doctest::Approx(3.5));
}

TEST_CASE("sam field is Hamiltonian: energy is stationary along the flow") {
  Rng rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const SamParams p{2.0 + 5.0 * (u(rng) + 1.0)};
    const SamState s{0.2 + std::abs(u(rng)), 3.0 * u(rng), u(rng), u(rng)};
    const SamState f = sam_vector_field(s, p);
    const double eps = 1e-8;
    const SamState moved{s.r + eps * f.r, s.phi + eps * f.phi, s.p_r + eps * f.p_r, s.p_phi + eps * f.p_phi};
    CHECK(std::abs((sam_energy(moved, p) - sam_energy(s, p)) / eps) < 1e-6);
  }
}

TEST_CASE("sam_sample_section_state") {
  for (double mu : {1.5, 3.0, 8.25, 15.0}) {
    const SamParams p{mu};
    Rng rng(42);
    for (int i = 0; i < 2000; ++i) {
      const SamState s = sam_sample_section_state(p, rng);
      CHECK(std::abs(sam_energy(s, p) - 1.0) < 1e-12);
      CHECK(s.phi == 0.0);
      CHECK(s.p_phi > 0.0);
      CHECK(sam_phi_dot(s) > 0.0);
      CHECK(s.r * (mu - 1.0) <= 1.0);
      CHECK(std::abs(s.p_r) <= std::sqrt(2.0 * (1.0 + mu)));
      if (mu == 15.0) CHECK(s.r <= 1.0 / 14.0);
    }
  }
  SUBCASE("fixed seed reproduces the sequence") {
    Rng a(9), b(9);
    for (int i = 0; i < 50; ++i) {
      const SamState x = sam_sample_section_state({4.0}, a), y = sam_sample_section_state({4.0}, b);
      CHECK(x.r == y.r);
      CHECK(x.p_r == y.p_r);
      CHECK(x.p_phi == y.p_phi);
    }
  }
  SUBCASE("section samples cover the allowed region evenly") {
    // Uniform over the region: the fraction with p_r > 0 is one half and the
    // fraction in the left half of the r-range matches the area ratio.
    const SamParams p{3.0};
    Rng rng(1);
    const int n = 20000;
    int positive = 0, left = 0;
    for (int i = 0; i < n; ++i) {
      const SamState s = sam_sample_section_state(p, rng);
      positive += s.p_r > 0.0;
      left += s.r < 0.25;
    }
    // Region {p_r^2 / 8 + 2 r <= 1}: half-width sqrt(8 (1 - 2 r)); the area of r < 0.25
    // over the full area is 1 - 0.5^{3/2} ~ 0.6464.
    CHECK(positive / double(n) == doctest::Approx(0.5).epsilon(0.03));
    CHECK(left / double(n) == doctest::Approx(1.0 - std::pow(0.5, 1.5)).epsilon(0.03));
  }
  Rng rng(0);
  CHECK_THROWS_AS(sam_sample_section_state({1.0}, rng), InvalidArgument);
}
