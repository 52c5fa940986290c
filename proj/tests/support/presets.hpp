#pragma once

#include "orderlab/unknown_link.hpp"

// Desk-scale parameter presets for the unit-torus scenarios. The paper's
// asymptotic thresholds collapse at n in the thousands (rings become empty
// or bands leave the manifold), so these presets pin every exposed constant
// to values that keep the sets populated at the sizes the tests run.

namespace orderlab::testsupport {

inline ManifoldSpec desk_torus() { return ManifoldSpec::flat_torus(2, 1.0, 0.45); }

inline LinkFunction desk_link() {
  return LinkFunction::linear_clamp(1.0, 0.0, 0.45, desk_torus().diameter());
}

// Observable desk preset: wide rings (population over purity), anchored at
// s1 = 0.3 with a mesoscopic band around it.
inline PipelineParams desk_params(const GraphSample& g) {
  PipelineParams p = PipelineParams::paper_defaults(g);
  p.xi = 0.05;  // effective scale entering the error-budget formulas
  p.proxy2_max = 0.05;
  p.ring_lo = 0.03;
  p.ring_hi = 0.08;
  p.meso_lo = 0.20;
  p.meso_hi = 0.42;
  p.tar_max = 0.10;
  p.anchor_s1 = 0.30;
  p.screening_factor = 1.5;
  p.candidate_tol = 0.05;
  p.range_tol = 0.25;
  return p;
}

// Planted-oracle preset: tight candidate shell so the anchor tolerance does
// not dominate the estimator error; used with CnMode::LatentOracle.
inline PipelineParams oracle_params(const GraphSample& g) {
  PipelineParams p = desk_params(g);
  p.candidate_tol = 0.012;
  p.xi = 0.0011;  // makes C_anchor delta^{-1} xi^2 / r_G about 0.02
  return p;
}

// Certification preset: thin planted rings, so the screened-ring lemma's
// items (i) and (ii) are simultaneously non-vacuous. delta_n is overridden
// because item coexistence needs delta^{-1} above the lemma's constant 20.
inline PipelineParams certification_params(const GraphSample& g) {
  PipelineParams p = PipelineParams::paper_defaults(g);
  p.delta_n = 0.04;
  p.screening_factor = 22.0;
  p.proxy2_max = 0.004;
  p.ring_lo = 0.0045;
  p.ring_hi = 0.0135;
  p.meso_lo = 0.30;
  p.meso_hi = 0.50;
  p.tar_max = 0.10;
  p.anchor_s1 = 0.40;
  p.candidate_tol = 0.05;
  p.range_tol = 0.25;
  return p;
}

inline ClusterParams singleton_clusters(const ManifoldSpec& spec) {
  ClusterParams c;
  c.method = ClusterMethod::Oracle;
  c.r0 = 0.05 * spec.r_G();
  c.lambda0 = 0.5;
  return c;
}

// Wide bands for tiny smoke graphs (hundreds of vertices): rings at the
// desk preset would be empty there.
inline PipelineParams smoke_params(const GraphSample& g) {
  PipelineParams p = desk_params(g);
  p.ring_lo = 0.02;
  p.ring_hi = 0.15;
  p.meso_lo = 0.12;
  p.meso_hi = 0.45;
  p.tar_max = 0.15;
  p.candidate_tol = 0.08;
  p.screening_factor = 3.0;
  return p;
}

// Unknown-link desk preset: reference pair at a mesoscopic-ish separation,
// wide eligibility so the net spans the reference geodesic, and a dyadic
// depth matched to the net resolution.
inline UnknownLinkParams desk_unknown(const PipelineParams& p) {
  UnknownLinkParams u = UnknownLinkParams::paper_defaults(p);
  u.anchor_band_lo = 0.25;
  u.anchor_band_hi = 0.35;
  u.anchor_target = 0.30;
  // The reference separation must stay below the anchor distance s1, or
  // q_obs saturates before reaching the far endpoint.
  u.ref_lo = 0.19;
  u.ref_hi = 0.22;
  u.eps_net = 0.0125;
  u.net_eligibility_max = 0.25;
  u.N_dyadic = 2;
  u.invert_clamp_tol = 0.05;
  u.err_unknown = 0.05;
  return u;
}

}  // namespace orderlab::testsupport
