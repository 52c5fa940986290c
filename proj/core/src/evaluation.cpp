#include "orderlab/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "orderlab/rng.hpp"

namespace orderlab {

double fit_dilation(std::span<const double> dhat, std::span<const double> d) {
  if (dhat.size() != d.size())
    throw std::invalid_argument("fit_dilation: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!std::isfinite(dhat[i]) || !std::isfinite(d[i])) continue;
    num += dhat[i] * d[i];
    den += d[i] * d[i];
  }
  if (den == 0.0) throw std::invalid_argument("fit_dilation: zero distances");
  return num / den;
}

double gw_identity_upper_bound(std::span<const double> dhat,
                               std::span<const double> dtrue, std::size_t N,
                               double p, double R) {
  if (dhat.size() != dtrue.size())
    throw std::invalid_argument("gw bound: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < dhat.size(); ++i)
    acc += 2.0 * std::pow(std::abs(dhat[i] - R * dtrue[i]), p);
  double n2 = static_cast<double>(N) * static_cast<double>(N);
  return 0.5 * std::pow(acc / n2, 1.0 / p);
}

double gw_identity_upper_bound(const GlobalMetric& dhat, const GraphSample& g,
                               double p, double R) {
  double acc = 0.0;
  for (std::size_t i = 0; i < dhat.N; ++i) {
    for (std::size_t j = i + 1; j < dhat.N; ++j) {
      double t = g.latent_distance(dhat.vertex_ids[i], dhat.vertex_ids[j]);
      acc += 2.0 * std::pow(std::abs(dhat.get(i, j) - R * t), p);
    }
  }
  double n2 = static_cast<double>(dhat.N) * static_cast<double>(dhat.N);
  return 0.5 * std::pow(acc / n2, 1.0 / p);
}

double volumetric_scale(const ManifoldSpec& spec, const PointArray& points,
                        std::size_t probes, std::uint64_t seed) {
  if (spec.dimension < 2)
    throw std::invalid_argument("volumetric_scale: d >= 2 required");
  if (points.size() == 0)
    throw std::invalid_argument("volumetric_scale: empty sample");
  std::vector<double> nearest(probes);
  for (std::size_t k = 0; k < probes; ++k) {
    Point probe = sample_point(spec, seed ^ 0x70726f6265ull, k);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.size(); ++i)
      best = std::min(best, geodesic_distance(spec, probe, points[i]));
    nearest[k] = best;
  }
  std::nth_element(nearest.begin(), nearest.begin() + nearest.size() / 2,
                   nearest.end());
  return nearest[nearest.size() / 2];
}

ErrorStats pointwise_error_stats(const GlobalMetric& m, const GraphSample& g,
                                 double R, std::size_t max_pairs,
                                 std::uint64_t seed) {
  ErrorStats st;
  const std::size_t total = m.N * (m.N - 1) / 2;
  std::vector<double> errs;
  auto record = [&](std::size_t i, std::size_t j) {
    double v = m.get(i, j);
    if (!std::isfinite(v)) {
      ++st.infinite_pairs;
      return;
    }
    double t = g.latent_distance(m.vertex_ids[i], m.vertex_ids[j]);
    errs.push_back(std::abs(v - R * t));
  };
  if (total <= max_pairs) {
    for (std::size_t i = 0; i < m.N; ++i)
      for (std::size_t j = i + 1; j < m.N; ++j) record(i, j);
  } else {
    auto s = rng::Stream::keyed(seed, 0x65727273ull);
    for (std::size_t k = 0; k < max_pairs; ++k) {
      auto i = s.below(m.N);
      auto j = s.below(m.N);
      if (i == j) continue;
      record(std::min(i, j), std::max(i, j));
    }
  }
  st.finite_pairs = errs.size();
  if (errs.empty()) return st;
  std::sort(errs.begin(), errs.end());
  st.median = errs[errs.size() / 2];
  st.sup = errs.back();
  double sum = 0.0;
  for (double e : errs) sum += e;
  st.mean = sum / static_cast<double>(errs.size());
  st.quantiles.resize(9);
  for (int q = 1; q <= 9; ++q)
    st.quantiles[q - 1] = errs[(errs.size() - 1) * q / 10];
  return st;
}

}  // namespace orderlab
