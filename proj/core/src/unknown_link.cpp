#include "orderlab/unknown_link.hpp"

#include <algorithm>
#include <cmath>

namespace orderlab {

UnknownLinkParams UnknownLinkParams::paper_defaults(const PipelineParams& p) {
  UnknownLinkParams u;
  const double dl = p.delta_n;
  u.anchor_target = std::pow(dl, 1.5) * p.r_G;
  u.anchor_band_lo = 0.5 * u.anchor_target;
  u.anchor_band_hi = 2.0 * u.anchor_target;
  const double d3 = dl * dl * dl * p.r_G;
  u.ref_lo = 0.5 * d3;
  u.ref_hi = 2.0 * d3;
  u.eps_net = std::pow(dl, -4.6) * (p.xi * p.xi) / p.r_G;
  u.net_eligibility_max = p.tar_max;
  u.err_unknown = std::pow(dl, -7.0) * (p.xi * p.xi) / p.r_G;
  double ratio = d3 / u.err_unknown;
  int N = ratio > 1.0 ? static_cast<int>(std::floor(std::log2(ratio))) : 1;
  u.N_dyadic = std::clamp(N, 1, 20);
  u.invert_clamp_tol = u.err_unknown;
  return u;
}

QObserver::QObserver(const PipelineContext& ctx, const RingSystem& rings,
                     const AnchorSpec& anchor)
    : ctx_(&ctx), rings_(&rings), anchor_(anchor) {
  auto v1 = ctx.partition()[Blocks::V1];
  for (std::uint32_t i = 0; i < v1.size(); ++i) v1_slot_[v1[i]] = i;
}

const std::vector<Candidate>& QObserver::candidates(std::uint32_t v) {
  auto it = cache_.find(v);
  if (it != cache_.end()) return it->second;
  auto slot = v1_slot_.find(v);
  if (slot == v1_slot_.end())
    throw std::invalid_argument("q_obs: vertex outside V1");
  auto cands = candidate_set(*ctx_, *rings_, slot->second, anchor_);
  return cache_.emplace(v, std::move(cands)).first->second;
}

std::optional<double> QObserver::operator()(std::uint32_t v, std::uint32_t w) {
  const auto& cands = candidates(v);
  if (cands.empty()) return std::nullopt;
  bool any = false;
  double best = 0.0, best_cn_v = 0.0;
  std::uint32_t best_u = 0;
  for (const auto& c : cands) {
    if (std::find(c.R.begin(), c.R.end(), w) != c.R.end()) continue;
    double val = ctx_->cn_of(c.R, w);
    if (!any || val > best || (val == best && c.u < best_u)) {
      best = val;
      best_cn_v = c.cn_v;
      best_u = c.u;
      any = true;
    }
  }
  if (!any) return std::nullopt;
  return best - best_cn_v;
}

AnchorSpec select_observed_anchor(const PipelineContext& ctx,
                                  const RingSystem& rings,
                                  const UnknownLinkParams& params) {
  auto v1 = ctx.partition()[Blocks::V1];
  auto u1 = ctx.partition()[Blocks::U1];
  bool found = false;
  double best_gap = 0.0;
  std::uint32_t best_u = 0, best_v = 0, best_vslot = 0, best_uslot = 0;
  float best_delta = 0.0f;
  for (std::uint32_t i = 0; i < v1.size(); ++i) {
    for (const auto& e : rings.meso_by_v[i]) {
      if (e.delta_uv < params.anchor_band_lo ||
          e.delta_uv > params.anchor_band_hi)
        continue;
      double gap = std::abs(e.delta_uv - params.anchor_target);
      std::uint32_t u = u1[e.u1_slot];
      bool better =
          !found || gap < best_gap ||
          (gap == best_gap &&
           std::make_pair(u, v1[i]) < std::make_pair(best_u, best_v));
      if (better) {
        found = true;
        best_gap = gap;
        best_u = u;
        best_v = v1[i];
        best_vslot = i;
        best_uslot = e.u1_slot;
        best_delta = e.delta_uv;
      }
    }
  }
  if (!found)
    throw PipelineAbort("observed anchor: no mesoscopic pair in the band");
  auto R = screened_ring(ctx, rings, best_vslot, best_uslot, best_delta);
  if (R.empty())
    throw PipelineAbort("observed anchor: screened ring is empty");
  AnchorSpec a;
  a.source = AnchorSpec::Source::Observed;
  a.p1 = ctx.cn_of(R, best_v);
  a.s1 = params.anchor_target;  // nominal
  a.u_star = best_u;
  a.v_star = best_v;
  return a;
}

std::pair<std::uint32_t, std::uint32_t> select_reference_pair(
    const PipelineContext& ctx, const UnknownLinkParams& params) {
  std::vector<std::uint32_t> v1(ctx.partition()[Blocks::V1].begin(),
                                ctx.partition()[Blocks::V1].end());
  std::sort(v1.begin(), v1.end());
  for (std::size_t i = 0; i < v1.size(); ++i) {
    for (std::size_t j = i + 1; j < v1.size(); ++j) {
      double dl = ctx.delta_cn_upto(v1[i], v1[j], params.ref_hi);
      if (dl >= params.ref_lo && dl <= params.ref_hi) return {v1[i], v1[j]};
    }
  }
  throw PipelineAbort("reference pair: no V1 pair in the band");
}

std::vector<NetPoint> build_net(const PipelineContext& ctx,
                                const RingSystem& rings, QObserver& observer,
                                std::uint32_t w0, std::uint32_t w1,
                                const UnknownLinkParams& params,
                                double* q_star_out) {
  auto q01 = observer(w0, w1);
  if (!q01 || *q01 <= 0.0)
    throw PipelineAbort("net: q_obs(w0, w1) is unavailable or non-positive");
  const double q_star = *q01;
  if (q_star_out) *q_star_out = q_star;
  if (!(params.eps_net > 0)) throw PipelineAbort("net: mesh must be positive");

  // Eligible vertices: Delta_cn to both endpoints within the band.
  std::vector<std::uint32_t> eligible;
  for (auto v : ctx.partition()[Blocks::V1]) {
    if (v == w0 || v == w1) continue;
    if (ctx.delta_cn_upto(v, w0, params.net_eligibility_max) >
        params.net_eligibility_max)
      continue;
    if (ctx.delta_cn_upto(v, w1, params.net_eligibility_max) >
        params.net_eligibility_max)
      continue;
    eligible.push_back(v);
  }
  std::sort(eligible.begin(), eligible.end());
  if (eligible.empty()) throw PipelineAbort("net: no eligible vertices");

  struct Cand {
    std::uint32_t v;
    double a0, a1;
  };
  std::vector<Cand> cands;
  for (auto v : eligible) {
    auto a0 = observer(w0, v);
    auto a1 = observer(w1, v);
    if (a0 && a1) cands.push_back({v, *a0, *a1});
  }
  if (cands.empty()) throw PipelineAbort("net: no measurable vertices");

  std::vector<NetPoint> net;
  for (double q_s = q_star / 4.0; q_s <= 3.0 * q_star / 4.0 + 1e-15;
       q_s += params.eps_net) {
    bool found = false;
    Cand best{0, 0, 0};
    for (const auto& c : cands) {
      if (c.a0 > q_s) continue;
      if (!found || c.a1 < best.a1 || (c.a1 == best.a1 && c.v < best.v)) {
        best = c;
        found = true;
      }
    }
    if (!found) continue;  // infeasible grid point: dropped
    net.push_back({q_s, best.v, best.a0, best.a1});
  }
  if (net.empty()) throw PipelineAbort("net: every grid point was infeasible");
  return net;
}

Maximizers ring_maximizers(const PipelineContext& ctx, QObserver& observer,
                           std::uint32_t v, std::uint32_t w0,
                           std::uint32_t w1) {
  const auto& cands = observer.candidates(v);
  Maximizers m;
  if (cands.empty()) return m;
  bool any0 = false, any1 = false;
  double best0 = 0.0, best1 = 0.0;
  for (const auto& c : cands) {
    bool has_w0 = std::find(c.R.begin(), c.R.end(), w0) != c.R.end();
    bool has_w1 = std::find(c.R.begin(), c.R.end(), w1) != c.R.end();
    if (!has_w0) {
      double val = ctx.cn_of(c.R, w0);
      if (!any0 || val > best0 ||
          (val == best0 && c.u < m.toward_w0.u)) {
        best0 = val;
        m.toward_w0 = c;
        any0 = true;
      }
    }
    if (!has_w1) {
      double val = ctx.cn_of(c.R, w1);
      if (!any1 || val > best1 ||
          (val == best1 && c.u < m.toward_w1.u)) {
        best1 = val;
        m.toward_w1 = c;
        any1 = true;
      }
    }
  }
  m.ok = any0 && any1;
  return m;
}

double QbarTable::eval(double t) const {
  t = std::clamp(t, 0.0, 1.0);
  const int K = static_cast<int>(values.size()) - 1;
  double pos = t * K;
  int k = std::min(static_cast<int>(pos), K - 1);
  double frac = pos - k;
  return values[k] + frac * (values[k + 1] - values[k]);
}

double QbarTable::invert(double y) const {
  const int K = static_cast<int>(values.size()) - 1;
  double best_t = 0.0;
  double best_res = std::abs(values[0] - y);
  for (int k = 0; k < K; ++k) {
    double lo = values[k], hi = values[k + 1];
    double t0 = static_cast<double>(k) / K, t1 = static_cast<double>(k + 1) / K;
    if ((y >= lo && y <= hi) || (y >= hi && y <= lo)) {
      if (hi == lo) {
        if (best_res > 0) return t0;
        continue;
      }
      double t = t0 + (y - lo) / (hi - lo) * (t1 - t0);
      return t;  // first exact crossing has the smallest t
    }
    double res = std::abs(hi - y);
    if (res < best_res) {
      best_res = res;
      best_t = t1;
    }
  }
  return best_t;
}

DyadicResult dyadic_reconstruct(const PipelineContext& ctx,
                                QObserver& observer,
                                const std::vector<NetPoint>& net,
                                std::uint32_t w0, std::uint32_t w1, int N) {
  if (net.size() < 2)
    throw PipelineAbort("dyadic reconstruction: degenerate net");
  const int S = static_cast<int>(net.size()) - 1;

  std::vector<std::optional<Maximizers>> maxim(net.size());
  auto maxim_at = [&](int s) -> const Maximizers& {
    if (!maxim[s])
      maxim[s] = ring_maximizers(ctx, observer, net[s].v, w0, w1);
    return *maxim[s];
  };

  DyadicResult out;
  out.qbar.N = N;
  const std::size_t knots = (std::size_t{1} << N) + 1;
  std::vector<int> s_of(knots, -1);
  s_of.front() = 0;
  s_of.back() = S;
  int frozen = 0;

  for (int level = 0; level < N; ++level) {
    const std::size_t step = std::size_t{1} << (N - level);       // span
    const std::size_t half = step / 2;
    for (std::size_t k = 0; k + step <= knots - 1; k += step) {
      const int s_lo = s_of[k];
      const int s_hi = s_of[k + step];
      if (s_of[k + half] >= 0) continue;
      if (s_lo + 1 >= s_hi) {
        s_of[k + half] = s_lo;  // freeze to the nearer (smaller) endpoint
        ++frozen;
        continue;
      }
      bool found = false;
      double best = 0.0;
      int best_s = s_lo;
      for (int s = s_lo; s <= s_hi; ++s) {
        const Maximizers& mx = maxim_at(s);
        if (!mx.ok) continue;
        const auto& R0 = mx.toward_w0.R;
        const auto& R1 = mx.toward_w1.R;
        if (std::find(R0.begin(), R0.end(), net[s_lo].v) != R0.end()) continue;
        if (std::find(R1.begin(), R1.end(), net[s_hi].v) != R1.end()) continue;
        double val = std::abs(ctx.cn_of(R0, net[s_lo].v) -
                              ctx.cn_of(R1, net[s_hi].v));
        if (!found || val < best) {
          best = val;
          best_s = s;
          found = true;
        }
      }
      if (!found) {
        s_of[k + half] = s_lo;
        ++frozen;
      } else {
        s_of[k + half] = best_s;
      }
    }
  }
  out.qbar.frozen_branches = frozen;
  out.net_index = s_of;

  // qbar through the ring of v_0's maximizer toward w0.
  const Maximizers& m0 = maxim_at(0);
  if (!m0.ok)
    throw PipelineAbort("dyadic reconstruction: no maximizer at the base");
  const auto& R0 = m0.toward_w0.R;
  const double base = ctx.cn_of(R0, net[0].v);
  out.qbar.values.assign(knots, 0.0);
  for (std::size_t k = 0; k < knots; ++k) {
    std::uint32_t vk = net[s_of[k]].v;
    if (vk == net[0].v) {
      out.qbar.values[k] = 0.0;
      continue;
    }
    if (std::find(R0.begin(), R0.end(), vk) != R0.end()) {
      out.qbar.values[k] = out.qbar.values[k ? k - 1 : 0];
      continue;
    }
    out.qbar.values[k] = base - ctx.cn_of(R0, vk);
  }

  // Strict monotonicity, with isotonic (PAVA) repair when violated.
  auto& vs = out.qbar.values;
  bool increasing = true;
  for (std::size_t k = 1; k < vs.size(); ++k)
    if (vs[k] <= vs[k - 1]) increasing = false;
  if (!increasing) {
    std::vector<double> orig = vs;
    // Pool adjacent violators.
    std::vector<double> val;
    std::vector<std::size_t> cnt;
    for (double x : vs) {
      val.push_back(x);
      cnt.push_back(1);
      while (val.size() >= 2 && val[val.size() - 2] >= val.back()) {
        double merged = (val[val.size() - 2] * cnt[cnt.size() - 2] +
                         val.back() * cnt.back()) /
                        (cnt[cnt.size() - 2] + cnt.back());
        cnt[cnt.size() - 2] += cnt.back();
        val.pop_back();
        cnt.pop_back();
        val.back() = merged;
      }
    }
    std::size_t idx = 0;
    for (std::size_t b = 0; b < val.size(); ++b)
      for (std::size_t r = 0; r < cnt[b]; ++r) vs[idx++] = val[b];
    // Strictify flat runs by an epsilon ramp.
    double span = std::max(1e-300, std::abs(vs.back() - vs.front()));
    for (std::size_t k = 1; k < vs.size(); ++k)
      if (vs[k] <= vs[k - 1]) vs[k] = vs[k - 1] + span * 1e-12;
    for (std::size_t k = 0; k < vs.size(); ++k)
      if (vs[k] != orig[k]) ++out.qbar.repair_count;
  }
  out.qbar.monotone = true;
  return out;
}

LocalTable unknown_table_with_calibration(const PipelineContext& ctx,
                                          const RingSystem& rings,
                                          const AnchorSpec& anchor,
                                          const QbarTable& qbar, double q_star,
                                          const UnknownLinkParams& params,
                                          std::size_t* clamped) {
  QObserver observer(ctx, rings, anchor);
  const double lo = qbar.values.front(), hi = qbar.values.back();
  LocalTable table;
  table.attempted = rings.tar.size();
  table.attempted_pairs = rings.tar;
  std::size_t clamp_count = 0;
  for (auto [a, b] : rings.tar) {
    double sum = 0.0;
    int cnt = 0;
    for (auto [v, w] : {std::pair{a, b}, std::pair{b, a}}) {
      auto q = observer(v, w);
      if (!q) continue;
      double y = *q;
      if (y < lo - params.invert_clamp_tol ||
          y > hi + params.invert_clamp_tol)
        ++clamp_count;
      double tau = qbar.invert(std::clamp(y, lo, hi));
      sum += q_star * tau;
      ++cnt;
    }
    if (cnt == 0) {
      ++table.no_estimate;
      continue;
    }
    table.entries.push_back({a, b, sum / cnt});
  }
  if (clamped) *clamped = clamp_count;
  return table;
}

UnknownPipelineResult run_unknown_local(const PipelineContext& ctx,
                                        const RingSystem& rings,
                                        const UnknownLinkParams& params) {
  UnknownPipelineResult res;
  res.anchor = select_observed_anchor(ctx, rings, params);
  QObserver observer(ctx, rings, res.anchor);
  auto [w0, w1] = select_reference_pair(ctx, params);
  res.w0 = w0;
  res.w1 = w1;
  res.net = build_net(ctx, rings, observer, w0, w1, params, &res.q_star);
  auto dy = dyadic_reconstruct(ctx, observer, res.net, w0, w1, params.N_dyadic);
  res.qbar = dy.qbar;
  res.table =
      unknown_table_with_calibration(ctx, rings, res.anchor, res.qbar,
                                     res.q_star, params, &res.clamped);
  return res;
}

double latent_net_span(const GraphSample& g, const UnknownPipelineResult& res) {
  Geodesic geo(g.spec, g.point(res.w0), g.point(res.w1));
  double span = g.spec.r_M() / 2.0;
  auto p0 = project_to_geodesic(geo, g.point(res.net.front().v), -span,
                                geo.length() + span);
  auto p1 = project_to_geodesic(geo, g.point(res.net.back().v), -span,
                                geo.length() + span);
  return std::abs(p1.s - p0.s);
}

}  // namespace orderlab
