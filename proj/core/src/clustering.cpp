#include "orderlab/clustering.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "orderlab/parallel.hpp"
#include "orderlab/rng.hpp"

namespace orderlab {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

// Composite Simpson with n even subintervals.
template <typename F>
double simpson(F&& f, double a, double b, int n) {
  if (n % 2) ++n;
  double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

}  // namespace

std::string to_string(ClusterMethod m) {
  return m == ClusterMethod::Oracle ? "oracle" : "common_neighbor";
}

ClusterMethod cluster_method_from_string(const std::string& s) {
  if (s == "oracle") return ClusterMethod::Oracle;
  if (s == "common_neighbor") return ClusterMethod::CommonNeighbor;
  throw std::invalid_argument("unknown cluster method: " + s);
}

double ClusterParams::occupancy_floor(const ManifoldSpec& spec,
                                      std::size_t n_block) const {
  return lambda0 * static_cast<double>(n_block) * spec.c_mu() *
         std::pow(r0, spec.dimension);
}

void ClusterParams::validate(const ManifoldSpec& spec) const {
  if (!(r0 > 0)) throw std::invalid_argument("cluster r0 must be positive");
  if (r0 > c_cn * spec.r_G() + 1e-12)
    throw std::invalid_argument("cluster r0 exceeds c_cn * r_G");
  if (!(lambda0 > 0) || lambda0 > 1.0)
    throw std::invalid_argument("cluster lambda0 must lie in (0,1]");
}

double analytic_common_neighbor_score(const ManifoldSpec& spec,
                                      const std::function<double(double)>& f,
                                      double t) {
  const auto& link = f;
  const int d = spec.dimension;
  const double L = spec.scale;
  if (spec.kind == ManifoldKind::Sphere) {
    // Exact polar reduction for every d.
    const double rho = L;
    const double tr = t / rho;
    auto inner = [&](double u) {
      auto g = [&](double phi) {
        double c = std::cos(u) * std::cos(tr) +
                   std::sin(u) * std::sin(tr) * std::cos(phi);
        c = std::clamp(c, -1.0, 1.0);
        double w = d >= 3 ? std::pow(std::sin(phi), d - 2) : 1.0;
        return w * link(rho * std::acos(c));
      };
      return simpson(g, 0.0, kPi, 256);
    };
    auto wfun = [&](double phi) {
      return d >= 3 ? std::pow(std::sin(phi), d - 2) : 1.0;
    };
    double wnorm = simpson(wfun, 0.0, kPi, 256);
    auto outer = [&](double u) {
      return std::pow(std::sin(u), d - 1) * link(rho * u) * inner(u) / wnorm;
    };
    auto onorm = [&](double u) { return std::pow(std::sin(u), d - 1); };
    return simpson(outer, 0.0, kPi, 512) / simpson(onorm, 0.0, kPi, 512);
  }
  // Torus: chart integral over the fundamental cell for d <= 3;
  // quasi-uniform lattice average above that.
  auto dist0 = [&](const std::vector<double>& x) {
    double s = 0.0;
    for (double c : x) {
      double m = std::remainder(c, L);
      s += m * m;
    }
    return std::sqrt(s);
  };
  auto dist_t = [&](const std::vector<double>& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double m = std::remainder(x[i] - (i == 0 ? t : 0.0), L);
      s += m * m;
    }
    return std::sqrt(s);
  };
  if (d == 2) {
    auto inner = [&](double x0) {
      auto g = [&](double x1) {
        std::vector<double> x{x0, x1};
        return link(dist0(x)) * link(dist_t(x));
      };
      return simpson(g, -L / 2, L / 2, 512);
    };
    return simpson(inner, -L / 2, L / 2, 512) / (L * L);
  }
  if (d == 3) {
    auto inner2 = [&](double x0, double x1) {
      auto g = [&](double x2) {
        std::vector<double> x{x0, x1, x2};
        return link(dist0(x)) * link(dist_t(x));
      };
      return simpson(g, -L / 2, L / 2, 96);
    };
    auto inner1 = [&](double x0) {
      auto g = [&](double x1) { return inner2(x0, x1); };
      return simpson(g, -L / 2, L / 2, 96);
    };
    auto outer = [&](double x0) { return inner1(x0); };
    return simpson(outer, -L / 2, L / 2, 96) / (L * L * L);
  }
  auto s = rng::Stream::keyed(0xc0ffee, static_cast<std::uint64_t>(d));
  const int kSamples = 200000;
  double acc = 0.0;
  std::vector<double> x(static_cast<std::size_t>(d));
  for (int i = 0; i < kSamples; ++i) {
    for (auto& c : x) c = s.uniform(-L / 2, L / 2);
    acc += link(dist0(x)) * link(dist_t(x));
  }
  return acc / kSamples;
}

namespace {

ClusterFamily oracle_clusters(const GraphSample& g, const Blocks& partition,
                              const ClusterParams& params) {
  auto v0 = partition[Blocks::V0];
  ClusterFamily fam;
  fam.params = params;
  fam.centers.assign(v0.begin(), v0.end());
  fam.B.resize(v0.size());
  fam.certified.assign(v0.size(), 0);
  double floor_val = params.occupancy_floor(g.spec, v0.size());
  parallel_for(0, v0.size(), [&](std::size_t i) {
    auto v = v0[i];
    auto& members = fam.B[i];
    for (auto v2 : v0)
      if (g.latent_distance(v, v2) <= params.r0) members.push_back(v2);
    fam.certified[i] =
        static_cast<double>(members.size()) >= floor_val ? 1 : 0;
  });
  return fam;
}

// Bit rows over V0 for 0/1 edge weights.
struct BitRows {
  std::size_t words = 0;
  std::vector<std::uint64_t> bits;
  const std::uint64_t* row(std::size_t i) const {
    return bits.data() + i * words;
  }
};

BitRows build_bit_rows(const GraphSample& g,
                       std::span<const std::uint32_t> v0) {
  BitRows r;
  const std::size_t n0 = v0.size();
  r.words = (n0 + 63) / 64;
  r.bits.assign(n0 * r.words, 0);
  for (std::size_t i = 0; i < n0; ++i) {
    const std::uint8_t* row = g.Z.row_u8(v0[i]);
    std::uint64_t* out = r.bits.data() + i * r.words;
    for (std::size_t j = 0; j < n0; ++j)
      if (row[v0[j]]) out[j / 64] |= (std::uint64_t{1} << (j % 64));
  }
  return r;
}

ClusterFamily common_neighbor_clusters(const GraphSample& g,
                                       const Blocks& partition,
                                       const ClusterParams& params) {
  if (!g.has_edges())
    throw std::logic_error("common-neighbor clustering requires edges");
  if (!g.link.range_in_unit_interval())
    throw std::invalid_argument(
        "common-neighbor clustering requires a nonnegative link; use the "
        "oracle generator for the noisy-distance model");
  auto v0 = partition[Blocks::V0];
  const std::size_t n0 = v0.size();
  if (n0 < 3)
    throw std::invalid_argument("common-neighbor clustering needs |V0| >= 3");

  ClusterFamily fam;
  fam.params = params;
  fam.centers.assign(v0.begin(), v0.end());
  fam.B.resize(n0);
  fam.certified.assign(n0, 0);

  const double denom = g.q_n * g.q_n * static_cast<double>(n0 - 2);
  const LinkFunction& link = g.link;
  auto p = [&link](double t) { return link(t); };
  auto p2 = [&link](double t) { double v = link(t); return v * v; };
  const double s_r0 = analytic_common_neighbor_score(g.spec, p, params.r0);
  const double s_0 = analytic_common_neighbor_score(g.spec, p, 0.0);
  // Fluctuation bound for one score entry: positional variance of the
  // witness average plus the edge-noise term of the configured model.
  const double s2_0 = analytic_common_neighbor_score(g.spec, p2, 0.0);
  double var_term = std::max(s2_0 - s_r0 * s_r0, 0.0);  // positional
  switch (g.noise.kind) {
    case NoiseModel::Kind::Bernoulli:
      var_term = std::max(s_0, 0.0);  // E[(ZZ)^2] = E[ZZ] covers both parts
      break;
    case NoiseModel::Kind::GaussianAdditive: {
      double sg = g.noise.sigma;
      double M = g.link.M_p();
      var_term += sg * sg * (2.0 * M * M + sg * sg);
      break;
    }
    case NoiseModel::Kind::None:
      break;
  }
  const double sigma_hat = std::sqrt(var_term / denom);
  const double theta =
      params.threshold_multiplier * s_r0 + params.z_margin * sigma_hat;
  const double floor_val = params.occupancy_floor(g.spec, n0);
  const auto target =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(floor_val)));

  const bool bit_path = g.Z.storage() == EdgeMatrix::Storage::DenseU8;
  BitRows rows;
  std::vector<float> frows;
  if (bit_path) {
    rows = build_bit_rows(g, v0);
  } else {
    frows.resize(n0 * n0);
    for (std::size_t i = 0; i < n0; ++i)
      for (std::size_t j = 0; j < n0; ++j)
        frows[i * n0 + j] = static_cast<float>(g.Z.get(v0[i], v0[j]));
  }

  parallel_for(0, n0, [&](std::size_t i) {
    std::vector<double> score(n0, 0.0);
    if (bit_path) {
      const std::uint64_t* ri = rows.row(i);
      for (std::size_t j = 0; j < n0; ++j) {
        if (j == i) continue;
        const std::uint64_t* rj = rows.row(j);
        std::uint64_t acc = 0;
        for (std::size_t w = 0; w < rows.words; ++w)
          acc += static_cast<std::uint64_t>(std::popcount(ri[w] & rj[w]));
        score[j] = static_cast<double>(acc) / denom;
      }
    } else {
      const float* ri = frows.data() + i * n0;
      for (std::size_t j = 0; j < n0; ++j) {
        if (j == i) continue;
        const float* rj = frows.data() + j * n0;
        double acc = 0.0;
        for (std::size_t w = 0; w < n0; ++w)
          acc += static_cast<double>(ri[w]) * rj[w];
        score[j] = acc / denom;
      }
    }
    auto& members = fam.B[i];
    members.push_back(v0[i]);
    for (std::size_t j = 0; j < n0; ++j)
      if (j != i && score[j] >= theta) members.push_back(v0[j]);
    if (members.size() >= target) {
      fam.certified[i] = 1;
      return;
    }
    // Fallback: top-scored vertices up to the occupancy target; uncertified.
    std::vector<std::size_t> order(n0);
    std::iota(order.begin(), order.end(), 0);
    order.erase(std::remove(order.begin(), order.end(), i), order.end());
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    for (auto j : order) {
      if (members.size() >= target) break;
      if (score[j] < theta) members.push_back(v0[j]);
    }
    fam.certified[i] = 0;
  });
  return fam;
}

}  // namespace

ClusterFamily build_clusters(const GraphSample& g, const Blocks& partition,
                             const ClusterParams& params) {
  params.validate(g.spec);
  return params.method == ClusterMethod::Oracle
             ? oracle_clusters(g, partition, params)
             : common_neighbor_clusters(g, partition, params);
}

ClusterFamily build_clusters(const GraphSample& g,
                             const ClusterParams& params) {
  return build_clusters(g, g.blocks, params);
}

ClusterValidation validate_clusters(const ClusterFamily& family,
                                    const GraphSample& g) {
  ClusterValidation val;
  const std::size_t m = family.size();
  val.radius_ok.assign(m, 1);
  val.occupancy_ok.assign(m, 1);
  double floor_val = family.params.occupancy_floor(g.spec, family.size());
  std::size_t bad_r = 0, bad_o = 0;
  for (std::size_t i = 0; i < m; ++i) {
    auto v = family.centers[i];
    for (auto v2 : family.B[i]) {
      if (g.latent_distance(v, v2) > family.params.r0 + 1e-12) {
        val.radius_ok[i] = 0;
        break;
      }
    }
    if (static_cast<double>(family.B[i].size()) < floor_val)
      val.occupancy_ok[i] = 0;
    bad_r += !val.radius_ok[i];
    bad_o += !val.occupancy_ok[i];
  }
  val.radius_failure_rate = m ? static_cast<double>(bad_r) / m : 0.0;
  val.occupancy_failure_rate = m ? static_cast<double>(bad_o) / m : 0.0;
  return val;
}

}  // namespace orderlab
