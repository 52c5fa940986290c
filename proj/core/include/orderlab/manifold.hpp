#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "orderlab/rng.hpp"

// Latent metric spaces: the flat torus T^d and the round sphere S^d.
// Both have closed-form geodesics, which keeps every comparison-geometry
// check exact (no ODE solvers anywhere).

namespace orderlab {

enum class ManifoldKind { FlatTorus, Sphere };

std::string to_string(ManifoldKind kind);
ManifoldKind manifold_kind_from_string(const std::string& s);

struct ManifoldSpec {
  ManifoldKind kind = ManifoldKind::FlatTorus;
  int dimension = 2;   // intrinsic dimension d >= 2
  double scale = 1.0;  // torus side length, or sphere radius
  double r_p = 0.25;   // link bi-Lipschitz radius, copied in for convenience

  static ManifoldSpec flat_torus(int d, double scale, double r_p);
  static ManifoldSpec sphere(int d, double scale, double r_p);

  void validate() const;  // throws std::invalid_argument

  // Ambient coordinate count: d for the torus chart, d+1 for the sphere.
  int ambient_dim() const {
    return kind == ManifoldKind::FlatTorus ? dimension : dimension + 1;
  }

  double curvature_bound() const {  // kappa
    return kind == ManifoldKind::FlatTorus ? 0.0 : 1.0 / (scale * scale);
  }
  double injectivity_radius() const;
  double r_M() const;  // min{ r_inj, pi/sqrt(kappa) }
  double r_mu() const;
  double c_mu() const;  // analytic lower-Ahlfors constant
  double r_G() const;   // (1/16) min{ r_M, r_p, r_mu }
  double diameter() const;
};

// Flat storage for point sets; points are rows of width `stride`.
struct PointArray {
  int stride = 0;
  std::vector<double> data;

  std::size_t size() const {
    return stride ? data.size() / static_cast<std::size_t>(stride) : 0;
  }
  std::span<const double> operator[](std::size_t i) const {
    return {data.data() + i * static_cast<std::size_t>(stride),
            static_cast<std::size_t>(stride)};
  }
  std::span<double> row(std::size_t i) {
    return {data.data() + i * static_cast<std::size_t>(stride),
            static_cast<std::size_t>(stride)};
  }
  void append(std::span<const double> p) {
    data.insert(data.end(), p.begin(), p.end());
  }
};

using Point = std::vector<double>;
using PointRef = std::span<const double>;

// i.i.d. uniform samples; deterministic in (seed, index), so point i does not
// depend on n.
PointArray sample_points(const ManifoldSpec& spec, std::size_t n,
                         std::uint64_t seed);
Point sample_point(const ManifoldSpec& spec, std::uint64_t seed,
                   std::uint64_t index);

double geodesic_distance(const ManifoldSpec& spec, PointRef p, PointRef q);

// Unit-speed geodesic through p toward q, gamma(0) = p, gamma(d(p,q)) = q,
// valid on the extended range [-2 r_M, d(p,q) + 2 r_M]. Degenerate p = q uses
// the first chart axis; near-antipodal sphere pairs use the lowest-index
// orthogonal axis, so reruns are reproducible.
class Geodesic {
 public:
  Geodesic(const ManifoldSpec& spec, PointRef p, PointRef q);

  Point at(double t) const;
  double length() const { return length_; }  // d(p,q)
  const ManifoldSpec& spec() const { return spec_; }

  // Torus: unit direction in chart coordinates. Sphere: the unit tangent
  // frame vector e1 (base holds e0 = p/scale).
  const std::vector<double>& direction() const { return dir_; }
  const std::vector<double>& base() const { return base_; }

  // Orthonormal basis of the normal space, parallel along the geodesic
  // (constant chart vectors on the torus; ambient vectors orthogonal to the
  // great-circle plane on the sphere).
  std::vector<std::vector<double>> normal_frame() const;

 private:
  ManifoldSpec spec_;
  double length_ = 0.0;
  std::vector<double> base_, dir_;
};

Point geodesic_point(const ManifoldSpec& spec, PointRef p, PointRef q,
                     double t);

struct Projection {
  Point foot;
  double s = 0.0;     // arclength parameter of the foot
  double dist = 0.0;  // d(x, foot)
  bool certified = false;  // uniqueness hypothesis held (x within r_M/4 of
                           // the window midpoint and window short enough)
};

// Nearest point of x on gamma over the window [s_lo, s_hi]. Closed form on
// the torus; golden-section to 1e-12 on the sphere (the distance along a
// short window is strictly convex).
Projection project_to_geodesic(const Geodesic& geo, PointRef x, double s_lo,
                               double s_hi);

struct SlabSpec {
  double h = 0.0;          // longitudinal half-width
  double rho_minus = 0.0;  // inner transverse radius
  double rho_plus = 0.0;   // outer transverse radius
  double t = 0.0;          // center parameter along the geodesic

  void validate() const;  // 0 <= rho_minus < rho_plus, h > 0
};

// Membership in the annular slab S(w,v,t): the projection foot gamma(s~) of x
// onto gamma_{w,v} satisfies |s~ - t| <= h and rho- <= d(x, gamma(s~)) <= rho+.
bool slab_contains(const ManifoldSpec& spec, PointRef w, PointRef v,
                   const SlabSpec& slab, PointRef x);
bool slab_contains(const Geodesic& geo, const SlabSpec& slab, PointRef x);

// Point at Fermi position (s, transverse radius rho) along geo; `axis` picks
// one of the d-1 transported normal directions (used to construct planted
// configurations and slab volume oracles).
Point fermi_point(const Geodesic& geo, double s, double rho, int axis,
                  double angle = 0.0);

// Riemannian angle at `apex` between the geodesics toward a and b,
// computed from log maps (exact on both manifolds).
double angle_at(const ManifoldSpec& spec, PointRef apex, PointRef a,
                PointRef b);

// Log map: tangent vector at p pointing to q with norm d(p,q); chart
// coordinates on the torus, ambient coordinates on the sphere.
std::vector<double> log_map(const ManifoldSpec& spec, PointRef p, PointRef q);

// Euclidean unit-ball volume omega_d (used by the analytic c_mu).
double unit_ball_volume(int d);
// Surface measure of the unit (d-1)-sphere in R^d.
double unit_sphere_area(int d);

}  // namespace orderlab
