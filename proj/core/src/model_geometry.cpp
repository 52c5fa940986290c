#include "orderlab/model_geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace orderlab::model_geometry {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

double g_corruption = 0.0;

double clamp_into(double x, double lo, double hi, double tol,
                  const char* what) {
  if (x < lo - tol || x > hi + tol) throw std::domain_error(what);
  return std::min(hi, std::max(lo, x));
}

}  // namespace

void set_opposite_side_corruption(double additive_error) {
  g_corruption = additive_error;
}

double opposite_side(double kappa, double theta, double a, double b,
                     double clamp_tol) {
  if (!(a > 0) || !(b > 0))
    throw std::domain_error("opposite_side: sides must be positive");
  if (theta < -clamp_tol || theta > kPi + clamp_tol)
    throw std::domain_error("opposite_side: theta outside [0, pi]");
  theta = std::min(kPi, std::max(0.0, theta));
  double c;
  if (kappa > 0) {
    double sk = std::sqrt(kappa);
    // The model triangle needs a+b <= pi/sqrt(kappa) (boundary included so
    // that quarter-circle sides remain legal) and each side below the
    // model-space diameter.
    if (a + b > kPi / sk || a >= kPi / sk || b >= kPi / sk)
      throw std::domain_error("opposite_side: sides leave the model domain");
    double arg = std::cos(sk * a) * std::cos(sk * b) +
                 std::sin(sk * a) * std::sin(sk * b) * std::cos(theta);
    arg = clamp_into(arg, -1.0, 1.0, clamp_tol, "opposite_side: acos domain");
    c = std::acos(arg) / sk;
  } else if (kappa == 0) {
    double c2 = a * a + b * b - 2.0 * a * b * std::cos(theta);
    c = std::sqrt(std::max(0.0, c2));
  } else {
    double sk = std::sqrt(-kappa);
    double arg = std::cosh(sk * a) * std::cosh(sk * b) -
                 std::sinh(sk * a) * std::sinh(sk * b) * std::cos(theta);
    if (arg < 1.0 - clamp_tol)
      throw std::domain_error("opposite_side: acosh domain");
    c = std::acosh(std::max(1.0, arg)) / sk;
  }
  return c + g_corruption;
}

double comparison_angle(double kappa, double a, double b, double c,
                        double clamp_tol) {
  if (!(a > 0) || !(b > 0) || !(c >= 0))
    throw std::domain_error("comparison_angle: invalid sides");
  if (c > a + b + clamp_tol || c < std::abs(a - b) - clamp_tol)
    throw std::domain_error("comparison_angle: triangle inequality violated");
  double arg;
  if (kappa > 0) {
    double sk = std::sqrt(kappa);
    if (a + b + c >= 2.0 * kPi / sk)
      throw std::domain_error("comparison_angle: perimeter >= 2 pi/sqrt(kappa)");
    double sa = std::sin(sk * a), sb = std::sin(sk * b);
    if (sa == 0.0 || sb == 0.0)
      throw std::domain_error("comparison_angle: degenerate spherical side");
    arg = (std::cos(sk * c) - std::cos(sk * a) * std::cos(sk * b)) / (sa * sb);
  } else if (kappa == 0) {
    arg = (a * a + b * b - c * c) / (2.0 * a * b);
  } else {
    double sk = std::sqrt(-kappa);
    arg = (std::cosh(sk * a) * std::cosh(sk * b) - std::cosh(sk * c)) /
          (std::sinh(sk * a) * std::sinh(sk * b));
  }
  arg = clamp_into(arg, -1.0, 1.0, clamp_tol, "comparison_angle: acos domain");
  return std::acos(arg);
}

DistortionReport check_distortion_bound(const ManifoldSpec& spec,
                                        PointRef apex, PointRef far,
                                        PointRef near) {
  DistortionReport r;
  r.a = geodesic_distance(spec, apex, far);
  r.b = geodesic_distance(spec, apex, near);
  r.c = geodesic_distance(spec, far, near);
  double quarter = spec.r_M() / 4.0;
  if (r.a >= quarter || r.b >= quarter || r.c >= quarter || r.b > r.a / 4.0 ||
      r.a <= 0 || r.b <= 0) {
    return r;  // skipped-case marker
  }
  r.applicable = true;
  r.theta = angle_at(spec, apex, far, near);
  r.residual = r.a - r.c - r.b * std::cos(r.theta);
  r.bound = 4.0 * r.b * r.b / r.a;
  r.ok = std::abs(r.residual) <= r.bound + 1e-12;
  return r;
}

RightTriangleReport check_right_triangle_relations(
    const ManifoldSpec& spec, PointRef A, PointRef B, PointRef C,
    const LemmaConstants& constants) {
  RightTriangleReport r;
  r.a = geodesic_distance(spec, B, C);
  r.b = geodesic_distance(spec, C, A);
  r.c = geodesic_distance(spec, A, B);
  r.alpha = angle_at(spec, A, B, C);
  double rg = spec.r_G();
  if (r.a > rg || r.b > rg || r.c > rg || std::abs(r.alpha - kPi / 2) > 1e-6 ||
      r.a <= 0)
    return r;
  r.applicable = true;
  r.theta = angle_at(spec, C, A, B);
  const double Cr = constants.C_right_angle;
  double as = r.a * std::sin(r.theta);
  double ac = r.a * std::cos(r.theta);
  r.sin_cos_ok = (as / Cr - 1e-15 <= r.c && r.c <= Cr * as + 1e-15) &&
                 (ac / Cr - 1e-15 <= r.b && r.b <= Cr * ac + 1e-15);
  double gap = r.a - r.b;
  double lower = (r.b == 0.0) ? r.c : std::min(r.c * r.c / r.b, r.c);
  r.lower_gap_ok = gap >= lower / 8.0 - 1e-12;
  if (r.b > 0 && r.c <= r.b / 4.0) {
    r.upper_gap_checked = true;
    r.upper_gap_ok = gap <= 4.0 * r.c * r.c / r.b + 1e-12;
  }
  r.ok = r.sin_cos_ok && r.lower_gap_ok && r.upper_gap_ok;
  return r;
}

DefectReport check_defect_small_angle(const ManifoldSpec& spec, PointRef apex,
                                      PointRef far, PointRef near,
                                      const LemmaConstants& constants) {
  DefectReport r;
  double a = geodesic_distance(spec, apex, far);
  double b = geodesic_distance(spec, apex, near);
  double c = geodesic_distance(spec, far, near);
  double rg = spec.r_G();
  if (a > rg || b > rg || c > rg || c <= 0 || c > a / 100.0) return r;
  double defect = b - (a - c);
  if (defect < 0 || defect > c / 4.0) return r;
  r.applicable = true;
  double theta = angle_at(spec, apex, far, near);
  r.lhs = defect;
  r.rhs = constants.c_small_angle_defect * (a * a / c) * theta * theta;
  r.ok = r.lhs >= r.rhs - 1e-14;
  return r;
}

DefectReport check_defect_near_pi(const ManifoldSpec& spec, PointRef A,
                                  PointRef B, PointRef C,
                                  const LemmaConstants& constants) {
  DefectReport r;
  double a = geodesic_distance(spec, B, C);
  double b = geodesic_distance(spec, C, A);
  double c = geodesic_distance(spec, A, B);
  double rg = spec.r_G();
  if (a > rg || b > rg || c > rg || b + c <= 0) return r;
  r.applicable = true;
  double alpha = angle_at(spec, A, B, C);
  r.lhs = (b + c) - a;
  r.rhs = constants.c_near_pi_defect * (b * c / (b + c)) * (kPi - alpha) *
          (kPi - alpha);
  r.ok = r.lhs >= r.rhs - 1e-14;
  return r;
}

}  // namespace orderlab::model_geometry
