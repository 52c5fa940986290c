#pragma once

#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "orderlab/clustering.hpp"
#include "orderlab/graph_model.hpp"

// The ORDER machinery: Delta_cn proxy, proxy sets, rings, screened rings,
// mesoscopic/target pairs, anchored candidate sets, and the known-link local
// distance estimator.

namespace orderlab {

// Averages are either observable (cn, from edges) or latent oracles (acn,
// from positions); the oracle mode runs the identical pipeline with the
// conditional expectations in place of the empirical averages.
enum class CnMode { Observable, LatentOracle };

struct PipelineParams {
  // Fundamental scales.
  double delta_n = 0.0;  // 1/log(5n)
  double xi = 0.0;       // (1/(q_n n))^{1/(d+5)} (log 5n)^{C_xi}
  double C_xi = 1.0;
  double r_G = 0.0;

  // Set thresholds, in Delta_cn units.
  double proxy2_max = 0.0;        // B_v^(2): Delta <= delta^3 xi
  double ring_lo = 0.0;           // ring{u}: delta^2 xi <= Delta
  double ring_hi = 0.0;           //          Delta <= delta xi
  double meso_lo = 0.0;           // meso: delta^2 r_G <= Delta
  double meso_hi = 0.0;           //       Delta <= delta r_G
  double tar_max = 0.0;           // tar: Delta <= delta^3 r_G
  double screening_factor = 0.0;  // coefficient of Delta(u,u')^2/Delta(u,v);
                                  // default (ell^2/96L^2) delta^{-1}

  // Anchoring and calibration.
  double anchor_s1 = 0.0;       // known-link target s1 = delta^1.5 r_G
  double candidate_tol = 0.0;   // |cn(R,v) - p1| <= 2 C_ring_avg delta^{-1} xi^2/r_G
  double range_tol = 0.0;       // admissible overshoot of M outside p's range

  // Derived lemma constants (configurable; paper-faithful defaults).
  double C_proxy = 0.0;        // max{2 L_p, 6/ell_p}
  double C_stability = 0.0;    // 2 C_proxy
  double C_ring_avg = 0.0;     // 2 L_p C_stability
  double C_anchor_dist = 0.0;  // 2 C_ring_avg + 2

  // Reporting-only scales.
  double proxy_floor = 0.0;  // log^2(5n)/sqrt(q_n 5n)

  // Default slab dimensions.
  double slab_h = 0.0;          // delta^4 xi^2
  double slab_rho_minus = 0.0;  // (7/8) delta^1.5 xi
  double slab_rho_plus = 0.0;   // (9/8) delta^1.5 xi

  double err_known() const {  // C delta^{-1} xi^2 / r_G
    return C_anchor_dist * (xi * xi) / (delta_n * r_G);
  }

  static PipelineParams paper_defaults(const GraphSample& g);
  static PipelineParams paper_defaults(const ManifoldSpec& spec,
                                       const LinkFunction& link,
                                       std::size_t n_block, double q_n);
  SlabSpec default_slab(double t) const {
    return SlabSpec{slab_h, slab_rho_minus, slab_rho_plus, t};
  }
};

struct AnchorSpec {
  enum class Source { KnownLink, Observed };
  Source source = Source::KnownLink;
  double p1 = 0.0;
  double s1 = 0.0;  // p^{-1}(p1) when the link is known; nominal otherwise
  std::uint32_t u_star = 0, v_star = 0;  // provenance in Observed mode
};

AnchorSpec known_link_anchor(const LinkFunction& link,
                             const PipelineParams& params);

// Precomputed normalized-average tables against the V0 clusters, shared by
// every Delta_cn scan. Verticies outside V0 are addressed by their "rest"
// index (position in V1|V2|U1|U2 concatenated in partition order).
class PipelineContext {
 public:
  PipelineContext(const GraphSample& g, const Blocks& partition,
                  const ClusterFamily& clusters, const PipelineParams& params,
                  CnMode mode);

  const GraphSample& graph() const { return *g_; }
  const Blocks& partition() const { return *partition_; }
  const ClusterFamily& clusters() const { return *clusters_; }
  const PipelineParams& params() const { return params_; }
  CnMode mode() const { return mode_; }

  bool in_rest(std::uint32_t v) const { return rest_index_[v] >= 0; }

  // Delta_cn(a,b) = max_{v in V0} |cn(B_v,a) - cn(B_v,b)|; exact, memoized.
  double delta_cn(std::uint32_t a, std::uint32_t b) const;

  // Early-exit scan: the exact value if it is <= cutoff, otherwise the
  // (partial) running maximum, which is guaranteed to exceed cutoff.
  double delta_cn_upto(std::uint32_t a, std::uint32_t b, double cutoff) const;

  // cn or acn according to the context mode.
  double cn_of(std::span<const std::uint32_t> U, std::uint32_t x) const;

  std::size_t cluster_count() const { return n0_; }

 private:
  const GraphSample* g_;
  const Blocks* partition_;
  const ClusterFamily* clusters_;
  PipelineParams params_;
  CnMode mode_;

  std::size_t n0_ = 0;
  std::vector<std::int64_t> rest_index_;  // global id -> rest slot, -1 outside
  std::vector<float> proxy_;              // [rest slot][cluster j], row-major

  const float* proxy_row(std::uint32_t v) const {
    return proxy_.data() + static_cast<std::size_t>(rest_index_[v]) * n0_;
  }

  mutable std::mutex memo_mutex_;
  mutable std::unordered_map<std::uint64_t, double> memo_;
};

struct RingBuildStats {
  std::size_t proxy2_empty = 0;
  std::size_t ring_empty = 0;
  std::size_t meso_pairs = 0;
  std::size_t tar_pairs = 0;
};

struct RingSystem {
  // Indexed by position within the partition blocks.
  std::vector<std::vector<std::uint32_t>> proxy2;  // per V1 slot: ids in V2
  std::vector<std::vector<std::uint32_t>> ring;    // per U1 slot: ids in U2
  std::vector<std::vector<float>> ring_delta;      // Delta_cn(u,u') per member

  struct MesoEdge {
    std::uint32_t u1_slot;
    float delta_uv;
  };
  std::vector<std::vector<MesoEdge>> meso_by_v;     // per V1 slot
  std::vector<std::pair<std::uint32_t, std::uint32_t>> tar;  // global (v,w), v<w

  // cn(B_v^(2), x) for x in U1|U2 (columns) and v in V1 (rows); NaN when
  // B_v^(2) is empty.
  std::vector<float> proxy2_avg;
  std::size_t proxy2_avg_stride = 0;
  std::vector<std::int64_t> u_index;  // global id -> U1|U2 slot

  RingBuildStats stats;

  float proxy2_cn(std::uint32_t v_slot, std::uint32_t x_global) const {
    return proxy2_avg[static_cast<std::size_t>(v_slot) * proxy2_avg_stride +
                      static_cast<std::size_t>(u_index[x_global])];
  }
};

RingSystem build_ring_system(const PipelineContext& ctx);

// Screened ring R_{u,v} for a mesoscopic pair: ring members whose proxy-set
// average moves by less than screening_factor * Delta(u,u')^2 / Delta(u,v).
std::vector<std::uint32_t> screened_ring(const PipelineContext& ctx,
                                         const RingSystem& rings,
                                         std::uint32_t v_slot,
                                         std::uint32_t u_slot, float delta_uv);

struct Candidate {
  std::uint32_t u = 0;  // global id in U1
  std::vector<std::uint32_t> R;
  double cn_v = 0.0;  // cn(R_{u,v}, v)
};

// Anchored candidate set Cs_v; candidates carry their screened rings.
std::vector<Candidate> candidate_set(const PipelineContext& ctx,
                                     const RingSystem& rings,
                                     std::uint32_t v_slot,
                                     const AnchorSpec& anchor);

enum class NoEstimate {
  None,
  EmptyCandidates,
  EmptyRings,
  OutOfRange,
};

struct LocalEstimate {
  std::optional<double> dhat;
  NoEstimate reason = NoEstimate::None;
  std::uint32_t argmax_u = 0;
  double M = 0.0;  // max_u cn(R_{u,v}, w)
};

// One-directional known-link estimate of d(v,w) from v's candidate set.
LocalEstimate local_estimate_known_p(const PipelineContext& ctx,
                                     const std::vector<Candidate>& cands,
                                     const AnchorSpec& anchor,
                                     std::uint32_t w);

struct LocalTable {
  struct Entry {
    std::uint32_t v, w;
    double dhat;
  };
  std::vector<Entry> entries;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> attempted_pairs;
  std::size_t attempted = 0;
  std::size_t no_estimate = 0;
};

// Symmetrized estimates over every tar pair (averaging the two directions
// when both exist).
LocalTable build_local_table_known_p(const PipelineContext& ctx,
                                     const RingSystem& rings,
                                     const AnchorSpec& anchor);

// Naive cluster baseline p^{-1}(cn(B_v^(2), w)); no-estimate when B_v^(2)
// is empty.
std::optional<double> naive_cluster_estimate(const PipelineContext& ctx,
                                             const RingSystem& rings,
                                             std::uint32_t v_slot,
                                             std::uint32_t w);

struct ProxyBilipschitzReport {
  std::size_t pairs_in_band = 0;
  std::size_t pairs_ok = 0;
  double fraction_ok = 1.0;  // vacuously 1 when the band is empty
  double C = 0.0;
  double band_lo = 0.0, band_hi = 0.0;
};

// Distribution of d(X_u,X_w)/Delta_cn(u,w) over pairs with Delta_cn in the
// band; asserts the [1/C, C] sandwich fraction. Uses latent positions.
ProxyBilipschitzReport proxy_bilipschitz_report(const PipelineContext& ctx,
                                                double band_lo,
                                                double band_hi);

struct SlabOccupancyReport {
  std::size_t samples = 0;
  std::size_t min_count = std::numeric_limits<std::size_t>::max();
  double mean_count = 0.0;
  double paper_bound = 0.0;  // n delta^{5d} xi^{d+1}; informational
  std::size_t below_bound = 0;
};

// Occupancy of moving ring slabs S(w,v,t) over sampled (w,v,t); informational
// at desk scale (the asymptotic bound may fail and is reported, not asserted).
SlabOccupancyReport slab_occupancy_report(const PipelineContext& ctx,
                                          std::size_t n_samples,
                                          std::uint64_t seed);

}  // namespace orderlab
