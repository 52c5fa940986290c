#include <doctest.h>

#include <cmath>

#include <stdexcept>
#include "orderlab/model_geometry.hpp"
#include "support/geom_helpers.hpp"

using namespace orderlab;
using namespace orderlab::model_geometry;
using namespace orderlab::testsupport;

namespace {
constexpr double kPi = 3.14159265358979323846;

const ManifoldSpec kTorus = ManifoldSpec::flat_torus(2, 1.0, 0.45);
const ManifoldSpec kSphere = ManifoldSpec::sphere(2, 1.0, 1.0);
}  // namespace

TEST_CASE("law of cosines closed forms") {
  CHECK(opposite_side(0.0, kPi / 2, 3.0, 4.0) == doctest::Approx(5.0));
  // cos c = cos a cos b = 0 at a = b = pi/2.
  CHECK(opposite_side(1.0, kPi / 2, kPi / 2, kPi / 2) ==
        doctest::Approx(kPi / 2));
  // kappa -> 0 continuity.
  double eu = std::sqrt(0.09 + 0.49 - 0.42 * std::cos(1.0));
  CHECK(std::abs(opposite_side(1e-8, 1.0, 0.3, 0.7) - eu) <= 1e-6);
  CHECK(std::abs(opposite_side(-1e-8, 1.0, 0.3, 0.7) - eu) <= 1e-6);

  CHECK_THROWS_AS(opposite_side(1.0, 0.5, 2.0, 2.0), std::domain_error);
  CHECK_THROWS_AS(opposite_side(0.0, 0.5, -1.0, 2.0), std::domain_error);
}

TEST_CASE("comparison angle closed forms") {
  CHECK(comparison_angle(0.0, 3.0, 4.0, 5.0) == doctest::Approx(kPi / 2));
  // Degenerate limit: theta -> 0 as c -> |a-b|.
  CHECK(comparison_angle(0.0, 1.0, 0.4, 0.6 + 1e-9) <= 2e-4);
  CHECK(comparison_angle(1.0, 1.0, 0.4, 0.6 + 1e-9) <= 2e-4);
  // Spherical equilateral, cross-checked against the closed form.
  double c1 = std::cos(1.0), s1 = std::sin(1.0);
  CHECK(comparison_angle(1.0, 1.0, 1.0, 1.0) ==
        doctest::Approx(std::acos(c1 * (1 - c1) / (s1 * s1))));
  CHECK_THROWS_AS(comparison_angle(0.0, 1.0, 1.0, 3.0), std::domain_error);
}

TEST_CASE("opposite_side and comparison_angle round trip") {
  auto s = rng::Stream::keyed(21, 1);
  for (int rep = 0; rep < 5000; ++rep) {
    double kappa = s.uniform(-4.0, 4.0);
    double a = s.uniform(0.05, 0.6), b = s.uniform(0.05, 0.6);
    double theta = s.uniform(0.05, kPi - 0.05);
    double c = opposite_side(kappa, theta, a, b);
    if (c < 1e-6) continue;
    double back = opposite_side(kappa, comparison_angle(kappa, a, b, c), a, b);
    CHECK(std::abs(back - c) <= 1e-10);
  }
}

TEST_CASE("opposite_side is increasing in theta") {
  for (double kappa : {-2.0, 0.0, 1.0, 3.0}) {
    for (double a : {0.1, 0.4}) {
      for (double b : {0.2, 0.5}) {
        double prev = opposite_side(kappa, 0.001, a, b);
        for (int k = 1; k <= 100; ++k) {
          double th = 0.001 + (kPi - 0.002) * k / 100.0;
          double c = opposite_side(kappa, th, a, b);
          CHECK(c > prev);
          prev = c;
        }
      }
    }
  }
}

TEST_CASE("curvature comparison sandwich") {
  auto s = rng::Stream::keyed(22, 2);
  // Sphere triangles: |K| = 1, so os^1 <= c <= os^{-1}.
  for (int rep = 0; rep < 5000; ++rep) {
    Point apex = random_point(kSphere, s);
    auto e1 = random_tangent(kSphere, apex, s);
    auto e2 = random_tangent(kSphere, apex, s);
    double theta = angle_at(kSphere, apex, exp_map(kSphere, apex, e1, 0.1),
                            exp_map(kSphere, apex, e2, 0.1));
    if (theta < 0.05 || theta > kPi - 0.05) continue;
    double a = s.uniform(0.05, 0.7), b = s.uniform(0.05, 0.7);
    Point pa = exp_map(kSphere, apex, e1, a);
    Point pb = exp_map(kSphere, apex, e2, b);
    double c = geodesic_distance(kSphere, pa, pb);
    CHECK(opposite_side(1.0, theta, a, b) <= c + 1e-10);
    CHECK(c <= opposite_side(-1.0, theta, a, b) + 1e-10);
  }
  // Torus: flat, so any kappa > 0 sandwich brackets the Euclidean value.
  for (int rep = 0; rep < 2000; ++rep) {
    Point apex = random_point(kTorus, s);
    auto e1 = random_tangent(kTorus, apex, s);
    auto e2 = random_tangent(kTorus, apex, s);
    double a = s.uniform(0.02, 0.2), b = s.uniform(0.02, 0.2);
    Point pa = exp_map(kTorus, apex, e1, a);
    Point pb = exp_map(kTorus, apex, e2, b);
    double theta = angle_at(kTorus, apex, pa, pb);
    double c = geodesic_distance(kTorus, pa, pb);
    CHECK(opposite_side(1.0, theta, a, b) <= c + 1e-10);
    CHECK(c <= opposite_side(-1.0, theta, a, b) + 1e-10);
  }
}

TEST_CASE("small angle bound in the spherical model") {
  auto s = rng::Stream::keyed(23, 3);
  int checked = 0;
  for (int rep = 0; rep < 200000 && checked < 10000; ++rep) {
    double a = s.uniform(0.05, kPi / 4 - 1e-3);
    double b = a * s.uniform(0.3, 1.3);
    if (b >= kPi / 4) continue;
    double theta = s.uniform(0.0, 0.8);
    double c = opposite_side(1.0, theta, a, b);
    if (c > a / 2) continue;
    ++checked;
    CHECK(theta <= 2.0 * c / a + 1e-12);
  }
  CHECK(checked == 10000);
}

TEST_CASE("geometric distortion bound") {
  SUBCASE("collinear is exact") {
    Point apex{0.2, 0.2};
    Point far{0.3, 0.2};  // a = 0.1
    Point near{0.22, 0.2};  // b = 0.02, collinear
    auto rep = check_distortion_bound(kTorus, apex, far, near);
    REQUIRE(rep.applicable);
    CHECK(std::abs(rep.residual) <= 1e-12);
    CHECK(rep.ok);
  }
  SUBCASE("right angle stays inside the bound") {
    Point apex{0.2, 0.2};
    Point far{0.3, 0.2};
    Point near{0.2, 0.22};
    auto rep = check_distortion_bound(kTorus, apex, far, near);
    REQUIRE(rep.applicable);
    // a - c = a - sqrt(a^2+b^2) in [-b^2/a, 0].
    CHECK(rep.residual <= 0.0 + 1e-15);
    CHECK(rep.residual >= -rep.bound);
    CHECK(rep.ok);
  }
  SUBCASE("10^4 sphere triangles, zero violations") {
    auto s = rng::Stream::keyed(24, 4);
    int applicable = 0, violations = 0;
    for (int rep = 0; rep < 60000 && applicable < 10000; ++rep) {
      Point apex = random_point(kSphere, s);
      auto e1 = random_tangent(kSphere, apex, s);
      auto e2 = random_tangent(kSphere, apex, s);
      double a = s.uniform(0.01, kSphere.r_M() / 4 * 0.999);
      double b = s.uniform(0.001, a / 4);
      auto r = check_distortion_bound(kSphere, apex,
                                      exp_map(kSphere, apex, e1, a),
                                      exp_map(kSphere, apex, e2, b));
      if (!r.applicable) continue;
      ++applicable;
      violations += !r.ok;
    }
    CHECK(applicable == 10000);
    CHECK(violations == 0);
  }
  SUBCASE("torus triangles as well") {
    auto s = rng::Stream::keyed(25, 5);
    int applicable = 0, violations = 0;
    for (int rep = 0; rep < 60000 && applicable < 10000; ++rep) {
      Point apex = random_point(kTorus, s);
      auto e1 = random_tangent(kTorus, apex, s);
      auto e2 = random_tangent(kTorus, apex, s);
      double a = s.uniform(0.01, kTorus.r_M() / 4 * 0.999);
      double b = s.uniform(0.001, a / 4);
      auto r = check_distortion_bound(kTorus, apex,
                                      exp_map(kTorus, apex, e1, a),
                                      exp_map(kTorus, apex, e2, b));
      if (!r.applicable) continue;
      ++applicable;
      violations += !r.ok;
    }
    CHECK(applicable == 10000);
    CHECK(violations == 0);
  }
}

TEST_CASE("right triangle relations") {
  SUBCASE("euclidean 3-4-5") {
    // Scaled into r_G; right angle at A between the axes.
    double u = kTorus.r_G() / 6.0;
    Point A{0.5, 0.5};
    Point B{0.5 + 3 * u, 0.5};
    Point C{0.5, 0.5 + 4 * u};
    auto r = check_right_triangle_relations(kTorus, A, B, C);
    REQUIRE(r.applicable);
    CHECK(r.a == doctest::Approx(5 * u));
    CHECK(r.lower_gap_ok);
    CHECK_FALSE(r.upper_gap_checked);  // c > b/4
    CHECK(r.ok);
  }
  SUBCASE("thin euclidean triangle hits the upper gap branch") {
    double b = kTorus.r_G() * 0.8;
    double c = b / 8.0;
    Point A{0.5, 0.5};
    Point B{0.5 + c, 0.5};
    Point C{0.5, 0.5 + b};
    auto r = check_right_triangle_relations(kTorus, A, B, C);
    REQUIRE(r.applicable);
    CHECK(r.upper_gap_checked);
    CHECK(r.ok);
  }
  SUBCASE("10^4 random right sphere triangles") {
    auto s = rng::Stream::keyed(26, 6);
    int applicable = 0, violations = 0;
    double rg = kSphere.r_G();
    for (int rep = 0; rep < 60000 && applicable < 10000; ++rep) {
      Point A = random_point(kSphere, s);
      auto e1 = random_tangent(kSphere, A, s);
      auto e2 = orthogonalize(kSphere, A, e1, random_tangent(kSphere, A, s));
      double c = s.uniform(1e-4, rg * 0.45);
      double b = s.uniform(1e-4, rg * 0.45);
      auto r = check_right_triangle_relations(
          kSphere, A, exp_map(kSphere, A, e1, c), exp_map(kSphere, A, e2, b));
      if (!r.applicable) continue;
      ++applicable;
      violations += !r.ok;
    }
    CHECK(applicable == 10000);
    CHECK(violations == 0);
  }
}

TEST_CASE("one-sided small-angle defect") {
  SUBCASE("collinear gives 0 >= 0") {
    Point apex{0.2, 0.2};
    double a = kTorus.r_G() * 0.9;
    Point far{0.2 + a, 0.2};
    Point near{0.2 + a - a / 200.0, 0.2};
    auto r = check_defect_small_angle(kTorus, apex, far, near);
    REQUIRE(r.applicable);
    CHECK(r.lhs == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.ok);
  }
  SUBCASE("euclidean series ratio") {
    // b-(a-c) ~ (a(a-c)/2c) theta^2; ratio to (a^2/c) theta^2 is about 1/2.
    double a = kTorus.r_G() * 0.9;
    double c = a / 150.0;
    Point apex{0.2, 0.2};
    Point far{0.2 + a, 0.2};
    auto s = rng::Stream::keyed(27, 7);
    int applicable = 0;
    for (int rep = 0; rep < 3000; ++rep) {
      double theta = s.uniform(0.0, 0.2 * std::sqrt(c / a));
      Point near{0.2 + (a - c) * std::cos(theta),
                 0.2 + (a - c) * std::sin(theta)};
      auto r = check_defect_small_angle(kTorus, apex, far, near);
      if (!r.applicable) continue;
      ++applicable;
      CHECK(r.ok);
      if (r.lhs > 1e-14) CHECK(r.lhs >= 0.4 * (a * a / c) *
                                            angle_at(kTorus, apex, far, near) *
                                            angle_at(kTorus, apex, far, near));
    }
    CHECK(applicable >= 1000);
  }
  SUBCASE("10^4 admissible sphere triangles") {
    auto s = rng::Stream::keyed(28, 8);
    int applicable = 0, violations = 0;
    double rg = kSphere.r_G();
    for (int rep = 0; rep < 200000 && applicable < 10000; ++rep) {
      Point apex = random_point(kSphere, s);
      auto e1 = random_tangent(kSphere, apex, s);
      auto e2 = orthogonalize(kSphere, apex, e1,
                              random_tangent(kSphere, apex, s));
      double a = s.uniform(rg * 0.3, rg * 0.99);
      double c = s.uniform(a / 500.0, a / 100.0);
      double theta = s.uniform(0.0, 0.45 * std::sqrt(c / a));
      // near point at distance ~ a-c from apex, angle theta off the far ray
      std::vector<double> dir(e1.size());
      for (std::size_t i = 0; i < dir.size(); ++i)
        dir[i] = std::cos(theta) * e1[i] + std::sin(theta) * e2[i];
      Point far = exp_map(kSphere, apex, e1, a);
      Point near = exp_map(kSphere, apex, dir, a - c);
      auto r = check_defect_small_angle(kSphere, apex, far, near);
      if (!r.applicable) continue;
      ++applicable;
      violations += !r.ok;
    }
    CHECK(applicable == 10000);
    CHECK(violations == 0);
  }
}

TEST_CASE("near-pi defect") {
  SUBCASE("collinear gives 0 >= 0") {
    Point A{0.2, 0.2};
    Point B{0.21, 0.2};
    Point C{0.19, 0.2};  // alpha = pi exactly
    auto r = check_defect_near_pi(kTorus, A, B, C);
    REQUIRE(r.applicable);
    CHECK(std::abs(r.lhs) <= 1e-12);
    CHECK(r.ok);
  }
  SUBCASE("10^4 sphere triangles") {
    auto s = rng::Stream::keyed(29, 9);
    int applicable = 0, violations = 0;
    double rg = kSphere.r_G();
    for (int rep = 0; rep < 60000 && applicable < 10000; ++rep) {
      Point A = random_point(kSphere, s);
      auto e1 = random_tangent(kSphere, A, s);
      auto e2 = orthogonalize(kSphere, A, e1, random_tangent(kSphere, A, s));
      double b = s.uniform(rg * 0.05, rg * 0.5);
      double c = s.uniform(rg * 0.05, rg * 0.5);
      double alpha = s.uniform(2.0, kPi);
      std::vector<double> dir(e1.size());
      for (std::size_t i = 0; i < dir.size(); ++i)
        dir[i] = std::cos(alpha) * e1[i] + std::sin(alpha) * e2[i];
      Point B = exp_map(kSphere, A, e1, c);
      Point C = exp_map(kSphere, A, dir, b);
      if (geodesic_distance(kSphere, B, C) > rg) continue;
      auto r = check_defect_near_pi(kSphere, A, B, C);
      if (!r.applicable) continue;
      ++applicable;
      violations += !r.ok;
    }
    CHECK(applicable == 10000);
    CHECK(violations == 0);
  }
}

TEST_CASE("two orthogonal perturbations of a geodesic segment") {
  const LemmaConstants constants;
  auto s = rng::Stream::keyed(30, 10);
  for (auto spec : {kTorus, kSphere}) {
    int checked = 0;
    for (int rep = 0; rep < 4000 && checked < 1000; ++rep) {
      Point a = random_point(spec, s), b = random_point(spec, s);
      Geodesic geo(spec, a, b);
      double s1 = s.uniform(0.0, spec.r_M() / 8);
      double d = s.uniform(spec.r_M() / 64, spec.r_M() / 16);
      double s2 = s1 + d;
      double y1 = s.uniform(0.0, d / 8), y2 = s.uniform(0.0, d / 8);
      Point p = geo.at(s1), q = geo.at(s2);
      Point pp = fermi_point(geo, s1, y1, 0);
      Point qq = fermi_point(geo, s2, y2, spec.dimension == 2 ? 0 : 1);
      double lhs = std::abs(geodesic_distance(spec, pp, qq) - d);
      double rhs = constants.C_two_perturbations * (y1 + y2) * (y1 + y2) / d;
      ++checked;
      CHECK(lhs <= rhs + 1e-12);
    }
    CHECK(checked == 1000);
  }
}

TEST_CASE("corruption hook breaks the round trip") {
  set_opposite_side_corruption(1e-3);
  double c = opposite_side(0.0, kPi / 2, 3.0, 4.0);
  CHECK(std::abs(c - 5.0) >= 1e-4);
  set_opposite_side_corruption(0.0);
  CHECK(opposite_side(0.0, kPi / 2, 3.0, 4.0) == doctest::Approx(5.0));
}
