#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "orderlab/global_metric.hpp"

namespace orderlab {

// Least-squares dilation: argmin_R sum (dhat - R d)^2 = <dhat,d>/<d,d>.
double fit_dilation(std::span<const double> dhat, std::span<const double> d);

// Identity-coupling Gromov-Wasserstein upper bound:
//   (1/2) ((1/n^2) sum_{v,v'} |dhat(v,v') - R d(v,v')|^p)^{1/p},
// the distortion of the coupling that maps each vertex to its own latent
// point (diagonal terms vanish, off-diagonal pairs count in both orders).
double gw_identity_upper_bound(const GlobalMetric& dhat, const GraphSample& g,
                               double p, double R);
double gw_identity_upper_bound(std::span<const double> dhat,
                               std::span<const double> dtrue, std::size_t N,
                               double p, double R);

// Median distance from fresh uniform probe points to their nearest sample:
// the n^{-1/d} spacing scale used as the volumetric benchmark.
double volumetric_scale(const ManifoldSpec& spec, const PointArray& points,
                        std::size_t probes, std::uint64_t seed);

struct ErrorStats {
  double median = 0.0;
  double sup = 0.0;
  double mean = 0.0;
  std::vector<double> quantiles;  // deciles 0.1 .. 0.9
  std::size_t finite_pairs = 0;
  std::size_t infinite_pairs = 0;
};

// |dhat - R d| over metric pairs; all pairs when their count is at most
// max_pairs, otherwise a seeded sample.
ErrorStats pointwise_error_stats(const GlobalMetric& m, const GraphSample& g,
                                 double R, std::size_t max_pairs,
                                 std::uint64_t seed);

struct SweepRow {
  std::size_t n_block = 0;
  std::uint64_t seed = 0;
  double median_err = 0.0;
  double sup_err = 0.0;
  double volumetric = 0.0;
  double gw_bound = 0.0;
  double runtime_s = 0.0;
};

}  // namespace orderlab
