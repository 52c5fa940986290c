#pragma once

#include "orderlab/manifold.hpp"

// Constant-curvature model-space trigonometry and the comparison-geometry
// residual checks used as oracles by the pipeline tests.

namespace orderlab::model_geometry {

// Conservative values for the unnamed universal constants; a violation at
// these values is treated as a failure.
struct LemmaConstants {
  double c_small_angle_defect = 1.0 / 20;  // b-(a-c) >= c0 (a^2/c) theta^2
  double c_near_pi_defect = 1.0 / 20;      // (b+c)-a >= c1 (bc/(b+c))(pi-alpha)^2
  double C_right_angle = 4.0;              // c ~ a sin(theta), b ~ a cos(theta)
  double C_two_perturbations = 8.0;        // |d(p',q')-d(p,q)| <= C (.)^2/d(p,q)
};

// Side opposite the angle theta in the model space of curvature kappa, with
// adjacent sides a and b. Inverse-trig arguments are clamped into their
// domain by at most `clamp_tol` before inversion; larger excursions and
// kappa>0 with a+b >= pi/sqrt(kappa) raise std::domain_error.
double opposite_side(double kappa, double theta, double a, double b,
                     double clamp_tol = 1e-12);

// Angle opposite side c in the model-space triangle with sides a, b, c.
double comparison_angle(double kappa, double a, double b, double c,
                        double clamp_tol = 1e-12);

// Test hook: when set, opposite_side returns a perturbed value. Used by the
// lemma-check self test to prove the properties can fail.
void set_opposite_side_corruption(double additive_error);

struct DistortionReport {
  bool applicable = false;  // preconditions held (else skipped-case marker)
  double a = 0, b = 0, c = 0, theta = 0;
  double residual = 0;  // a - c - b cos(theta)
  double bound = 0;     // 4 b^2 / a
  bool ok = false;
};

// Geometric-distortion residual on a manifold triangle. The angle theta sits
// at `apex` between the geodesics toward `far` (side a) and `near` (side b);
// c = d(far, near). Preconditions: pairwise distances < r_M/4 and b <= a/4.
DistortionReport check_distortion_bound(const ManifoldSpec& spec,
                                        PointRef apex, PointRef far,
                                        PointRef near);

struct RightTriangleReport {
  bool applicable = false;
  double a = 0, b = 0, c = 0, theta = 0, alpha = 0;
  bool sin_cos_ok = false;     // c ~ a sin(theta), b ~ a cos(theta) within C
  bool lower_gap_ok = false;   // a-b >= (1/8) min{c^2/b, c}
  bool upper_gap_ok = true;    // a-b <= 4 c^2/b when c <= b/4 (else skipped)
  bool upper_gap_checked = false;
  bool ok = false;
};

// Right-triangle relations. Vertices (A, B, C) with the right angle at A:
// a = d(B,C), b = d(C,A), c = d(A,B); theta is the angle at C (opposite c).
// Preconditions: sides <= r_G and the angle at A within 1e-6 of pi/2.
RightTriangleReport check_right_triangle_relations(
    const ManifoldSpec& spec, PointRef A, PointRef B, PointRef C,
    const LemmaConstants& constants = {});

struct DefectReport {
  bool applicable = false;
  double lhs = 0, rhs = 0;
  bool ok = false;
};

// One-sided small-angle defect: b-(a-c) >= c0 (a^2/c) theta^2 under
// c <= a/100, 0 <= b-(a-c) <= c/4, sides <= r_G. Labels as in
// check_distortion_bound: theta at apex, a = d(apex,far), b = d(apex,near),
// c = d(far,near).
DefectReport check_defect_small_angle(const ManifoldSpec& spec, PointRef apex,
                                      PointRef far, PointRef near,
                                      const LemmaConstants& constants = {});

// Near-pi defect: (b+c)-a >= c1 (bc/(b+c))(pi-alpha)^2 with alpha opposite
// side a; sides <= r_G. Vertices (A, B, C) with alpha at A, a = d(B,C),
// b = d(C,A), c = d(A,B).
DefectReport check_defect_near_pi(const ManifoldSpec& spec, PointRef A,
                                  PointRef B, PointRef C,
                                  const LemmaConstants& constants = {});

}  // namespace orderlab::model_geometry
