#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "orderlab/graph_model.hpp"

namespace orderlab {

enum class ClusterMethod { CommonNeighbor, Oracle };

std::string to_string(ClusterMethod m);
ClusterMethod cluster_method_from_string(const std::string& s);

struct ClusterParams {
  double r0 = 0.0;         // cluster radius; must satisfy r0 <= c_cn * r_G
  double lambda0 = 0.5;    // occupancy fraction
  double p0 = 0.05;        // failure probability target
  ClusterMethod method = ClusterMethod::Oracle;
  double c_cn = 0.05;      // admissible-radius constant (configured; reported)
  double threshold_multiplier = 1.0;  // CommonNeighbor: theta = mult * S(r0) + margin
  double z_margin = 4.0;              // fluctuation margin in score-sigma units

  // Occupancy floor lambda0 * n * c_mu * r0^d.
  double occupancy_floor(const ManifoldSpec& spec, std::size_t n_block) const;
  void validate(const ManifoldSpec& spec) const;
};

struct ClusterFamily {
  ClusterParams params;
  std::vector<std::uint32_t> centers;           // the V0 vertices, in order
  std::vector<std::vector<std::uint32_t>> B;    // B[i] for centers[i]
  std::vector<std::uint8_t> certified;

  std::size_t size() const { return centers.size(); }
};

// (r0, lambda0, p0) cluster generating algorithm on the induced subgraph of
// V0. Oracle mode reads latent points; CommonNeighbor mode uses only the
// edges within V0 x V0.
ClusterFamily build_clusters(const GraphSample& g, const ClusterParams& params);
ClusterFamily build_clusters(const GraphSample& g, const Blocks& partition,
                             const ClusterParams& params);

struct ClusterValidation {
  std::vector<std::uint8_t> radius_ok;     // all members within r0 of center
  std::vector<std::uint8_t> occupancy_ok;  // |B_v| >= lambda0 n c_mu r0^d
  double radius_failure_rate = 0.0;
  double occupancy_failure_rate = 0.0;
};

// Checks the cluster contract against latent positions (evaluation only).
ClusterValidation validate_clusters(const ClusterFamily& family,
                                    const GraphSample& g);

// Analytic common-neighbor score at center distance t for a uniform witness:
//   S(t) = int_M f(d(x,a)) f(d(x,b)) dmu(x),  d(a,b) = t.
// Nested Simpson in geodesic polar coordinates (exact reduction on the
// sphere for every d; torus uses the d<=3 chart integral, quasi-uniform
// sampling above that). Taking f = p^2 yields the second-moment profile used
// for the positional-fluctuation margin.
double analytic_common_neighbor_score(const ManifoldSpec& spec,
                                      const std::function<double(double)>& f,
                                      double t);

}  // namespace orderlab
