#include "orderlab/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace orderlab {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

double wrap_coord(double x, double scale) {
  double w = x - scale * std::floor(x / scale);
  if (w >= scale) w -= scale;  // guards the x == -0 / rounding edge
  return w;
}

// Minimum-image displacement component in [-scale/2, scale/2].
double min_image(double delta, double scale) {
  return std::remainder(delta, scale);
}

double dot(PointRef a, PointRef b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(PointRef a) { return std::sqrt(dot(a, a)); }

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

}  // namespace

std::string to_string(ManifoldKind kind) {
  return kind == ManifoldKind::FlatTorus ? "flat_torus" : "sphere";
}

ManifoldKind manifold_kind_from_string(const std::string& s) {
  if (s == "flat_torus" || s == "torus") return ManifoldKind::FlatTorus;
  if (s == "sphere") return ManifoldKind::Sphere;
  throw std::invalid_argument("unknown manifold kind: " + s);
}

ManifoldSpec ManifoldSpec::flat_torus(int d, double scale, double r_p) {
  ManifoldSpec spec{ManifoldKind::FlatTorus, d, scale, r_p};
  spec.validate();
  return spec;
}

ManifoldSpec ManifoldSpec::sphere(int d, double scale, double r_p) {
  ManifoldSpec spec{ManifoldKind::Sphere, d, scale, r_p};
  spec.validate();
  return spec;
}

void ManifoldSpec::validate() const {
  if (dimension < 2) throw std::invalid_argument("manifold dimension must be >= 2");
  if (!(scale > 0)) throw std::invalid_argument("manifold scale must be positive");
  if (!(r_p > 0)) throw std::invalid_argument("link radius r_p must be positive");
}

double ManifoldSpec::injectivity_radius() const {
  return kind == ManifoldKind::FlatTorus ? scale / 2.0 : kPi * scale;
}

double ManifoldSpec::r_M() const {
  // pi/sqrt(kappa) = +inf at kappa = 0; on the sphere it equals pi*scale.
  return injectivity_radius();
}

double ManifoldSpec::r_mu() const {
  return kind == ManifoldKind::FlatTorus ? scale / 2.0 : kPi * scale / 2.0;
}

double ManifoldSpec::c_mu() const {
  int d = dimension;
  if (kind == ManifoldKind::FlatTorus) {
    return unit_ball_volume(d) / (std::pow(2.0, d) * std::pow(scale, d));
  }
  // Cap lower bound: V(r) >= |S^{d-1}| (2/pi)^{d-1} r^d / d for r <= pi*rho/2.
  double wd = std::sqrt(kPi) * std::tgamma(d / 2.0) / std::tgamma((d + 1) / 2.0);
  return std::pow(2.0 / kPi, d - 1) / (d * wd * std::pow(scale, d));
}

double ManifoldSpec::r_G() const {
  return std::min({r_M(), r_p, r_mu()}) / 16.0;
}

double ManifoldSpec::diameter() const {
  return kind == ManifoldKind::FlatTorus
             ? (scale / 2.0) * std::sqrt(static_cast<double>(dimension))
             : kPi * scale;
}

double unit_ball_volume(int d) {
  return std::pow(kPi, d / 2.0) / std::tgamma(d / 2.0 + 1.0);
}

double unit_sphere_area(int d) {
  return 2.0 * std::pow(kPi, d / 2.0) / std::tgamma(d / 2.0);
}

Point sample_point(const ManifoldSpec& spec, std::uint64_t seed,
                   std::uint64_t index) {
  auto stream = rng::Stream::keyed(seed, /*a=*/0x706f696e74ull, index);
  Point p(static_cast<std::size_t>(spec.ambient_dim()));
  if (spec.kind == ManifoldKind::FlatTorus) {
    for (auto& c : p) c = spec.scale * stream.uniform01();
    return p;
  }
  double n = 0.0;
  do {
    for (auto& c : p) c = stream.normal();
    n = norm(p);
  } while (n < 1e-12);
  for (auto& c : p) c *= spec.scale / n;
  return p;
}

PointArray sample_points(const ManifoldSpec& spec, std::size_t n,
                         std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_points: n must be >= 1");
  spec.validate();
  PointArray pts;
  pts.stride = spec.ambient_dim();
  pts.data.reserve(n * static_cast<std::size_t>(pts.stride));
  for (std::size_t i = 0; i < n; ++i) pts.append(sample_point(spec, seed, i));
  return pts;
}

double geodesic_distance(const ManifoldSpec& spec, PointRef p, PointRef q) {
  if (spec.kind == ManifoldKind::FlatTorus) {
    double s2 = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      double d = min_image(q[i] - p[i], spec.scale);
      s2 += d * d;
    }
    return std::sqrt(s2);
  }
  // scale * arccos(<p,q>/scale^2), evaluated in the atan2 form, which keeps
  // full precision at both the coincident and antipodal ends.
  double diff2 = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double d = p[i] - q[i], s = p[i] + q[i];
    diff2 += d * d;
    sum2 += s * s;
  }
  return spec.scale * 2.0 * std::atan2(std::sqrt(diff2), std::sqrt(sum2));
}

Geodesic::Geodesic(const ManifoldSpec& spec, PointRef p, PointRef q)
    : spec_(spec) {
  const std::size_t m = p.size();
  if (spec.kind == ManifoldKind::FlatTorus) {
    base_.assign(p.begin(), p.end());
    for (auto& c : base_) c = wrap_coord(c, spec.scale);
    dir_.assign(m, 0.0);
    double l2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      dir_[i] = min_image(q[i] - p[i], spec.scale);
      l2 += dir_[i] * dir_[i];
    }
    length_ = std::sqrt(l2);
    if (length_ < 1e-15) {
      std::fill(dir_.begin(), dir_.end(), 0.0);
      dir_[0] = 1.0;  // canonical direction for the degenerate pair
      length_ = 0.0;
    } else {
      for (auto& c : dir_) c /= length_;
    }
    return;
  }
  // Sphere: orthonormal frame (e0, e1) spanning the great circle.
  base_.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) base_[i] = p[i] / spec.scale;
  length_ = geodesic_distance(spec, p, q);
  std::vector<double> w(m, 0.0);
  double qe0 = 0.0;
  for (std::size_t i = 0; i < m; ++i) qe0 += (q[i] / spec.scale) * base_[i];
  for (std::size_t i = 0; i < m; ++i) w[i] = q[i] / spec.scale - qe0 * base_[i];
  double wn = norm(w);
  if (wn < 1e-12) {
    // p = q or antipodal: lowest-index axis with a nonzero orthogonal part.
    for (std::size_t a = 0; a < m; ++a) {
      std::fill(w.begin(), w.end(), 0.0);
      w[a] = 1.0;
      double pr = dot(w, base_);
      for (std::size_t i = 0; i < m; ++i) w[i] -= pr * base_[i];
      wn = norm(w);
      if (wn > 1e-6) break;
    }
  }
  dir_ = std::move(w);
  for (auto& c : dir_) c /= wn;
}

Point Geodesic::at(double t) const {
  const std::size_t m = base_.size();
  Point out(m);
  if (spec_.kind == ManifoldKind::FlatTorus) {
    for (std::size_t i = 0; i < m; ++i)
      out[i] = wrap_coord(base_[i] + t * dir_[i], spec_.scale);
    return out;
  }
  double a = t / spec_.scale;
  double ca = std::cos(a), sa = std::sin(a);
  for (std::size_t i = 0; i < m; ++i)
    out[i] = spec_.scale * (ca * base_[i] + sa * dir_[i]);
  return out;
}

Point geodesic_point(const ManifoldSpec& spec, PointRef p, PointRef q,
                     double t) {
  return Geodesic(spec, p, q).at(t);
}

Projection project_to_geodesic(const Geodesic& geo, PointRef x, double s_lo,
                               double s_hi) {
  const ManifoldSpec& spec = geo.spec();
  if (s_hi < s_lo) std::swap(s_lo, s_hi);
  Projection out;
  double mid = 0.5 * (s_lo + s_hi);
  Point at_mid = geo.at(mid);
  double d_mid = geodesic_distance(spec, x, at_mid);
  out.certified =
      d_mid <= spec.r_M() / 4.0 && (s_hi - s_lo) <= spec.r_M() + 1e-12;

  if (spec.kind == ManifoldKind::FlatTorus) {
    // Lift locally around the window midpoint; exact for coherent lifts.
    const auto& dir = geo.direction();
    double along = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      along += min_image(x[i] - at_mid[i], spec.scale) * dir[i];
    out.s = std::clamp(mid + along, s_lo, s_hi);
  } else {
    // Golden-section on the strictly convex window.
    constexpr double kInvPhi = 0.61803398874989484820458683436563811772;
    double a = s_lo, b = s_hi;
    double c = b - (b - a) * kInvPhi;
    double d = a + (b - a) * kInvPhi;
    double fc = geodesic_distance(spec, x, geo.at(c));
    double fd = geodesic_distance(spec, x, geo.at(d));
    while (b - a > 1e-12) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - (b - a) * kInvPhi;
        fc = geodesic_distance(spec, x, geo.at(c));
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + (b - a) * kInvPhi;
        fd = geodesic_distance(spec, x, geo.at(d));
      }
    }
    out.s = 0.5 * (a + b);
    // Function-value comparisons are noise-limited near the minimum; polish
    // with a sign bisection of f'(s) = -<log_{gamma(s)}(x), gamma'(s)>, which
    // stays well-conditioned at the orthogonal foot.
    auto fprime = [&](double t) {
      Point base = geo.at(t);
      auto lg = log_map(spec, base, x);
      double aa = t / spec.scale;
      double deriv = 0.0;
      for (std::size_t i = 0; i < lg.size(); ++i) {
        double tang = -std::sin(aa) * geo.base()[i] +
                      std::cos(aa) * geo.direction()[i];
        deriv -= lg[i] * tang;
      }
      return deriv;
    };
    double lo2 = std::max(s_lo, out.s - 1e-6);
    double hi2 = std::min(s_hi, out.s + 1e-6);
    double flo = fprime(lo2), fhi = fprime(hi2);
    if (flo < 0.0 && fhi > 0.0) {
      for (int it = 0; it < 60 && hi2 - lo2 > 1e-14; ++it) {
        double mid = 0.5 * (lo2 + hi2);
        (fprime(mid) < 0.0 ? lo2 : hi2) = mid;
      }
      out.s = 0.5 * (lo2 + hi2);
    }
  }
  out.foot = geo.at(out.s);
  out.dist = geodesic_distance(spec, x, out.foot);
  return out;
}

void SlabSpec::validate() const {
  if (!(h > 0)) throw std::invalid_argument("slab h must be positive");
  if (!(rho_minus >= 0) || !(rho_plus > rho_minus))
    throw std::invalid_argument("slab radii must satisfy 0 <= rho- < rho+");
}

bool slab_contains(const Geodesic& geo, const SlabSpec& slab, PointRef x) {
  const ManifoldSpec& spec = geo.spec();
  double wext = std::max(spec.r_M() / 8.0, 2.0 * slab.h);
  Projection pr = project_to_geodesic(geo, x, slab.t - wext, slab.t + wext);
  if (std::abs(pr.s - slab.t) > slab.h) return false;
  return pr.dist >= slab.rho_minus && pr.dist <= slab.rho_plus;
}

bool slab_contains(const ManifoldSpec& spec, PointRef w, PointRef v,
                   const SlabSpec& slab, PointRef x) {
  return slab_contains(Geodesic(spec, w, v), slab, x);
}

std::vector<std::vector<double>> Geodesic::normal_frame() const {
  std::vector<std::vector<double>> span_vecs;
  const std::size_t m = base_.size();
  if (spec_.kind == ManifoldKind::FlatTorus) {
    span_vecs.push_back(dir_);
  } else {
    span_vecs.push_back(base_);
    span_vecs.push_back(dir_);
  }
  std::vector<std::vector<double>> basis;
  const std::size_t want = m - span_vecs.size();
  for (std::size_t a = 0; a < m && basis.size() < want; ++a) {
    std::vector<double> v(m, 0.0);
    v[a] = 1.0;
    for (const auto& s : span_vecs) {
      double pr = dot(v, s);
      for (std::size_t i = 0; i < m; ++i) v[i] -= pr * s[i];
    }
    for (const auto& b : basis) {
      double pr = dot(v, b);
      for (std::size_t i = 0; i < m; ++i) v[i] -= pr * b[i];
    }
    double n = norm(v);
    if (n > 1e-8) {
      for (auto& c : v) c /= n;
      basis.push_back(std::move(v));
    }
  }
  return basis;
}

Point fermi_point(const Geodesic& geo, double s, double rho, int axis,
                  double angle) {
  const ManifoldSpec& spec = geo.spec();
  auto basis = geo.normal_frame();
  if (basis.empty()) throw std::logic_error("fermi_point: no normal direction");
  const std::size_t m = static_cast<std::size_t>(spec.ambient_dim());
  std::vector<double> n(m, 0.0);
  const auto& na = basis[static_cast<std::size_t>(axis) % basis.size()];
  if (basis.size() >= 2 && std::abs(angle) > 0) {
    const auto& nb = basis[(static_cast<std::size_t>(axis) + 1) % basis.size()];
    for (std::size_t i = 0; i < m; ++i)
      n[i] = std::cos(angle) * na[i] + std::sin(angle) * nb[i];
  } else {
    n = na;
  }
  Point base = geo.at(s);
  Point out(m);
  if (spec.kind == ManifoldKind::FlatTorus) {
    for (std::size_t i = 0; i < m; ++i)
      out[i] = wrap_coord(base[i] + rho * n[i], spec.scale);
    return out;
  }
  double a = rho / spec.scale;
  double ca = std::cos(a), sa = std::sin(a);
  for (std::size_t i = 0; i < m; ++i)
    out[i] = ca * base[i] + spec.scale * sa * n[i];
  return out;
}

std::vector<double> log_map(const ManifoldSpec& spec, PointRef p, PointRef q) {
  const std::size_t m = p.size();
  std::vector<double> v(m, 0.0);
  if (spec.kind == ManifoldKind::FlatTorus) {
    for (std::size_t i = 0; i < m; ++i)
      v[i] = min_image(q[i] - p[i], spec.scale);
    return v;
  }
  double c = clamp_unit(dot(p, q) / (spec.scale * spec.scale));
  double alpha = std::acos(c);
  if (alpha < 1e-15) return v;
  double sa = std::sin(alpha);
  for (std::size_t i = 0; i < m; ++i) {
    double w = q[i] / spec.scale - c * (p[i] / spec.scale);
    v[i] = spec.scale * alpha * (w / sa);
  }
  return v;
}

double angle_at(const ManifoldSpec& spec, PointRef apex, PointRef a,
                PointRef b) {
  auto u = log_map(spec, apex, a);
  auto v = log_map(spec, apex, b);
  double nu = norm(u), nv = norm(v);
  if (nu < 1e-15 || nv < 1e-15) return 0.0;
  return std::acos(clamp_unit(dot(u, v) / (nu * nv)));
}

}  // namespace orderlab
