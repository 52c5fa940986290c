#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "orderlab/ring_pipeline.hpp"

// Distance recovery with an unknown link function: observable anchor,
// reference geodesic, monotonicity oracle q_obs, one-dimensional net, dyadic
// midpoint reconstruction of the calibration function, and inversion up to a
// dilation factor.

namespace orderlab {

struct PipelineAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnknownLinkParams {
  // Delta_cn band for the observed anchor pair (u*, v*).
  double anchor_band_lo = 0.0, anchor_band_hi = 0.0;
  double anchor_target = 0.0;  // tie-break toward delta^1.5 r_G
  // Delta_cn band for the reference pair (w0, w1).
  double ref_lo = 0.0, ref_hi = 0.0;
  double eps_net = 0.0;    // net mesh, delta^{-4.6} xi^2 / r_G
  // Delta_cn eligibility band for net candidates (pairs (v, w^i) must sit
  // below it). Defaults to the tar threshold; at desk scale it must exceed
  // half the reference-pair separation or the candidate lens is empty.
  double net_eligibility_max = 0.0;
  int N_dyadic = 1;        // floor(log2(delta^3 r_G / (delta^{-7} xi^2/r_G))), in [1,20]
  double invert_clamp_tol = 0.0;  // tolerated q_obs overshoot outside qbar's range
  double err_unknown = 0.0;       // delta^{-7} xi^2 / r_G

  static UnknownLinkParams paper_defaults(const PipelineParams& p);
};

// Caches candidate sets per V1 vertex so q_obs evaluations share them.
class QObserver {
 public:
  QObserver(const PipelineContext& ctx, const RingSystem& rings,
            const AnchorSpec& anchor);

  // q_obs(v, w) = cn(R_{u,v}, w) - cn(R_{u,v}, v) at the argmax candidate u.
  // v must lie in V1; returns nullopt when Cs_v is empty or every candidate
  // ring contains w.
  std::optional<double> operator()(std::uint32_t v, std::uint32_t w);

  const std::vector<Candidate>& candidates(std::uint32_t v);

 private:
  const PipelineContext* ctx_;
  const RingSystem* rings_;
  AnchorSpec anchor_;
  std::unordered_map<std::uint32_t, std::uint32_t> v1_slot_;
  std::unordered_map<std::uint32_t, std::vector<Candidate>> cache_;
};

// Observed anchor: p1 = cn(R_{u*,v*}, v*) over mesoscopic pairs with
// Delta_cn(u*,v*) in the configured band; ties broken by closeness to
// anchor_target, then lowest ids. Aborts when the band is empty.
AnchorSpec select_observed_anchor(const PipelineContext& ctx,
                                  const RingSystem& rings,
                                  const UnknownLinkParams& params);

// First pair in V1^2 (lexicographic by global id) with Delta_cn in the
// reference band; aborts when none exists.
std::pair<std::uint32_t, std::uint32_t> select_reference_pair(
    const PipelineContext& ctx, const UnknownLinkParams& params);

struct NetPoint {
  double q_s = 0.0;        // grid value
  std::uint32_t v = 0;     // selected vertex
  double q_obs_w0 = 0.0;   // q_obs(w0, v)
  double q_obs_w1 = 0.0;   // q_obs(w1, v)
};

// Discrete net along the reference geodesic: for each grid value q_s in
// [q*/4, 3q*/4], v_s minimizes q_obs(w1, v) subject to q_obs(w0, v) <= q_s
// over vertices with (v,w0) and (v,w1) both in tar. Infeasible grid points
// are dropped. Aborts when q* <= 0 or the net is empty.
std::vector<NetPoint> build_net(const PipelineContext& ctx,
                                const RingSystem& rings, QObserver& observer,
                                std::uint32_t w0, std::uint32_t w1,
                                const UnknownLinkParams& params,
                                double* q_star_out);

struct Maximizers {
  Candidate toward_w0;  // argmax_{u in Cs_v} cn(R_{u,v}, w0)
  Candidate toward_w1;
  bool ok = false;
};

Maximizers ring_maximizers(const PipelineContext& ctx, QObserver& observer,
                           std::uint32_t v, std::uint32_t w0,
                           std::uint32_t w1);

struct QbarTable {
  int N = 0;
  std::vector<double> values;  // 2^N + 1 knots, values at k/2^N
  bool monotone = false;
  int repair_count = 0;   // knots moved by the isotonic repair
  int frozen_branches = 0;  // dyadic branches frozen to an endpoint

  double eval(double t) const;  // piecewise-linear on [0,1]
  // argmin_t |qbar(t) - y|; exact crossing when y is in range, ties toward
  // smaller t.
  double invert(double y) const;
};

struct DyadicResult {
  QbarTable qbar;
  std::vector<int> net_index;  // s(k/2^N) for each knot
};

// Recursive midpoint selection along the net; qbar(k/2^N) is measured through
// the ring of v_0's maximizer toward w0. Requires a net with >= 2 points.
DyadicResult dyadic_reconstruct(const PipelineContext& ctx,
                                QObserver& observer,
                                const std::vector<NetPoint>& net,
                                std::uint32_t w0, std::uint32_t w1, int N);

struct UnknownPipelineResult {
  AnchorSpec anchor;
  std::uint32_t w0 = 0, w1 = 0;
  double q_star = 0.0;
  std::vector<NetPoint> net;
  QbarTable qbar;
  LocalTable table;       // dhat = q* tau_hat per tar pair (symmetrized)
  std::size_t clamped = 0;  // q_obs values outside qbar's range
};

// Full Appendix-C local pipeline on one ring system.
UnknownPipelineResult run_unknown_local(const PipelineContext& ctx,
                                        const RingSystem& rings,
                                        const UnknownLinkParams& params);

// Per-pair inversion against an already-built calibration (used to keep a
// single dilation across block-cover runs).
LocalTable unknown_table_with_calibration(const PipelineContext& ctx,
                                          const RingSystem& rings,
                                          const AnchorSpec& anchor,
                                          const QbarTable& qbar, double q_star,
                                          const UnknownLinkParams& params,
                                          std::size_t* clamped);

// Evaluation-only: the latent net span d1 = d(proj(v_first), proj(v_last))
// along gamma_{w0,w1}; the oracle dilation is R = q*/d1.
double latent_net_span(const GraphSample& g, const UnknownPipelineResult& res);

}  // namespace orderlab
