#include "orderlab/ring_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "orderlab/parallel.hpp"
#include "orderlab/rng.hpp"

namespace orderlab {

namespace {

std::uint64_t pair_key(std::uint32_t i, std::uint32_t j) {
  if (i > j) std::swap(i, j);
  return (static_cast<std::uint64_t>(i) << 32) | j;
}

}  // namespace

PipelineParams PipelineParams::paper_defaults(const ManifoldSpec& spec,
                                              const LinkFunction& link,
                                              std::size_t n_block,
                                              double q_n) {
  PipelineParams p;
  const double N = 5.0 * static_cast<double>(n_block);
  const double n = static_cast<double>(n_block);
  const int d = spec.dimension;
  p.r_G = spec.r_G();
  p.delta_n = 1.0 / std::log(N);
  p.C_xi = 1.0;
  p.xi = std::pow(1.0 / (q_n * n), 1.0 / (d + 5)) *
         std::pow(std::log(N), p.C_xi);
  const double dl = p.delta_n;
  p.proxy2_max = dl * dl * dl * p.xi;
  p.ring_lo = dl * dl * p.xi;
  p.ring_hi = dl * p.xi;
  p.meso_lo = dl * dl * p.r_G;
  p.meso_hi = dl * p.r_G;
  p.tar_max = dl * dl * dl * p.r_G;
  const double ell = link.ell_p(), L = link.L_p();
  p.screening_factor = (ell * ell) / (96.0 * L * L) / dl;
  p.anchor_s1 = std::pow(dl, 1.5) * p.r_G;
  p.C_proxy = std::max(2.0 * L, 6.0 / ell);
  p.C_stability = 2.0 * p.C_proxy;
  p.C_ring_avg = 2.0 * L * p.C_stability;
  p.C_anchor_dist = 2.0 * p.C_ring_avg + 2.0;
  p.candidate_tol = 2.0 * p.C_ring_avg * (p.xi * p.xi) / (dl * p.r_G);
  p.range_tol = 2.0 * p.candidate_tol;
  p.proxy_floor = std::log(N) * std::log(N) / std::sqrt(q_n * N);
  p.slab_h = std::pow(dl, 4.0) * p.xi * p.xi;
  p.slab_rho_minus = (7.0 / 8.0) * std::pow(dl, 1.5) * p.xi;
  p.slab_rho_plus = (9.0 / 8.0) * std::pow(dl, 1.5) * p.xi;
  return p;
}

PipelineParams PipelineParams::paper_defaults(const GraphSample& g) {
  return paper_defaults(g.spec, g.link, g.n_block, g.q_n);
}

AnchorSpec known_link_anchor(const LinkFunction& link,
                             const PipelineParams& params) {
  AnchorSpec a;
  a.source = AnchorSpec::Source::KnownLink;
  a.s1 = params.anchor_s1;
  a.p1 = link(a.s1);
  return a;
}

PipelineContext::PipelineContext(const GraphSample& g, const Blocks& partition,
                                 const ClusterFamily& clusters,
                                 const PipelineParams& params, CnMode mode)
    : g_(&g),
      partition_(&partition),
      clusters_(&clusters),
      params_(params),
      mode_(mode) {
  if (mode == CnMode::Observable && !g.has_edges())
    throw std::logic_error("observable pipeline requires materialized edges");
  n0_ = clusters.size();
  if (n0_ == 0) throw std::invalid_argument("pipeline requires clusters on V0");

  const std::size_t N = g.points.size();
  rest_index_.assign(N, -1);
  std::vector<std::uint32_t> rest;
  for (auto id : {Blocks::V1, Blocks::V2, Blocks::U1, Blocks::U2})
    for (auto v : partition[id]) {
      rest_index_[v] = static_cast<std::int64_t>(rest.size());
      rest.push_back(v);
    }

  // proxy_[x][j] = cn(B_j, x) (acn in oracle mode).
  proxy_.assign(rest.size() * n0_, 0.0f);
  const auto storage = g.has_edges() ? g.Z.storage() : EdgeMatrix::Storage::Empty;
  parallel_for(0, n0_, [&](std::size_t j) {
    const auto& members = clusters_->B[j];
    if (members.empty()) return;
    const double inv = 1.0 / static_cast<double>(members.size());
    if (mode_ == CnMode::LatentOracle) {
      for (std::size_t r = 0; r < rest.size(); ++r) {
        double acc = 0.0;
        for (auto m : members) acc += g.link(g.latent_distance(m, rest[r]));
        proxy_[r * n0_ + j] = static_cast<float>(acc * inv);
      }
      return;
    }
    const double scale = inv / g.q_n;
    if (storage == EdgeMatrix::Storage::DenseU8) {
      std::vector<std::uint32_t> acc(N, 0);
      for (auto m : members) {
        const std::uint8_t* row = g.Z.row_u8(m);
        for (std::size_t x = 0; x < N; ++x) acc[x] += row[x];
      }
      for (std::size_t r = 0; r < rest.size(); ++r)
        proxy_[r * n0_ + j] = static_cast<float>(acc[rest[r]] * scale);
    } else if (storage == EdgeMatrix::Storage::DenseF64) {
      std::vector<double> acc(N, 0.0);
      for (auto m : members) {
        const double* row = g.Z.row_f64(m);
        for (std::size_t x = 0; x < N; ++x) acc[x] += row[x];
      }
      for (std::size_t r = 0; r < rest.size(); ++r)
        proxy_[r * n0_ + j] = static_cast<float>(acc[rest[r]] * scale);
    } else {
      for (std::size_t r = 0; r < rest.size(); ++r) {
        double acc = 0.0;
        for (auto m : members) acc += g.Z.get(m, rest[r]);
        proxy_[r * n0_ + j] = static_cast<float>(acc * scale);
      }
    }
  });
}

double PipelineContext::delta_cn_upto(std::uint32_t a, std::uint32_t b,
                                      double cutoff) const {
  if (a == b) return 0.0;
  if (rest_index_[a] < 0 || rest_index_[b] < 0)
    throw std::invalid_argument("delta_cn: vertex outside V1|V2|U1|U2");
  const float* ra = proxy_row(a);
  const float* rb = proxy_row(b);
  const float cut = static_cast<float>(cutoff);
  float m = 0.0f;
  std::size_t j = 0;
  constexpr std::size_t kChunk = 64;
  for (; j + kChunk <= n0_; j += kChunk) {
    float cm = 0.0f;
    for (std::size_t k = 0; k < kChunk; ++k)
      cm = std::max(cm, std::abs(ra[j + k] - rb[j + k]));
    m = std::max(m, cm);
    if (m > cut) return m;
  }
  for (; j < n0_; ++j) m = std::max(m, std::abs(ra[j] - rb[j]));
  return m;
}

double PipelineContext::delta_cn(std::uint32_t a, std::uint32_t b) const {
  if (a == b) return 0.0;
  const std::uint64_t key = pair_key(a, b);
  {
    std::lock_guard<std::mutex> lock(memo_mutex_);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
  }
  double v = delta_cn_upto(a, b, std::numeric_limits<double>::infinity());
  std::lock_guard<std::mutex> lock(memo_mutex_);
  memo_.emplace(key, v);
  return v;
}

double PipelineContext::cn_of(std::span<const std::uint32_t> U,
                              std::uint32_t x) const {
  return mode_ == CnMode::Observable ? cn(*g_, U, x) : acn(*g_, U, x);
}

RingSystem build_ring_system(const PipelineContext& ctx) {
  const GraphSample& g = ctx.graph();
  const Blocks& blocks = ctx.partition();
  const PipelineParams& P = ctx.params();
  auto v1 = blocks[Blocks::V1];
  auto v2 = blocks[Blocks::V2];
  auto u1 = blocks[Blocks::U1];
  auto u2 = blocks[Blocks::U2];

  RingSystem rs;
  rs.proxy2.resize(v1.size());
  rs.ring.resize(u1.size());
  rs.ring_delta.resize(u1.size());
  rs.meso_by_v.resize(v1.size());

  parallel_for(0, v1.size(), [&](std::size_t i) {
    for (auto x : v2) {
      double dl = ctx.delta_cn_upto(v1[i], x, P.proxy2_max);
      if (dl <= P.proxy2_max) rs.proxy2[i].push_back(x);
    }
  });

  parallel_for(0, u1.size(), [&](std::size_t i) {
    for (auto x : u2) {
      double dl = ctx.delta_cn_upto(u1[i], x, P.ring_hi);
      if (dl <= P.ring_hi && dl >= P.ring_lo) {
        rs.ring[i].push_back(x);
        rs.ring_delta[i].push_back(static_cast<float>(dl));
      }
    }
  });

  parallel_for(0, v1.size(), [&](std::size_t i) {
    for (std::size_t js = 0; js < u1.size(); ++js) {
      double dl = ctx.delta_cn_upto(u1[js], v1[i], P.meso_hi);
      if (dl <= P.meso_hi && dl >= P.meso_lo)
        rs.meso_by_v[i].push_back(
            {static_cast<std::uint32_t>(js), static_cast<float>(dl)});
    }
  });

  {
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> chunks(
        v1.size());
    parallel_for(0, v1.size(), [&](std::size_t i) {
      for (std::size_t j = i + 1; j < v1.size(); ++j) {
        double dl = ctx.delta_cn_upto(v1[i], v1[j], P.tar_max);
        if (dl <= P.tar_max)
          chunks[i].push_back(
              {std::min(v1[i], v1[j]), std::max(v1[i], v1[j])});
      }
    });
    for (auto& c : chunks) rs.tar.insert(rs.tar.end(), c.begin(), c.end());
  }

  // cn(B_v^(2), x) over x in U1|U2, used by every screening comparison.
  rs.u_index.assign(g.points.size(), -1);
  std::vector<std::uint32_t> udom;
  for (auto v : u1) {
    rs.u_index[v] = static_cast<std::int64_t>(udom.size());
    udom.push_back(v);
  }
  for (auto v : u2) {
    rs.u_index[v] = static_cast<std::int64_t>(udom.size());
    udom.push_back(v);
  }
  rs.proxy2_avg_stride = udom.size();
  rs.proxy2_avg.assign(v1.size() * udom.size(),
                       std::numeric_limits<float>::quiet_NaN());
  parallel_for(0, v1.size(), [&](std::size_t i) {
    const auto& members = rs.proxy2[i];
    if (members.empty()) return;
    for (std::size_t r = 0; r < udom.size(); ++r)
      rs.proxy2_avg[i * udom.size() + r] =
          static_cast<float>(ctx.cn_of(members, udom[r]));
  });

  for (const auto& s : rs.proxy2) rs.stats.proxy2_empty += s.empty();
  for (const auto& s : rs.ring) rs.stats.ring_empty += s.empty();
  for (const auto& m : rs.meso_by_v) rs.stats.meso_pairs += m.size();
  rs.stats.tar_pairs = rs.tar.size();
  return rs;
}

std::vector<std::uint32_t> screened_ring(const PipelineContext& ctx,
                                         const RingSystem& rings,
                                         std::uint32_t v_slot,
                                         std::uint32_t u_slot,
                                         float delta_uv) {
  const PipelineParams& P = ctx.params();
  auto u1 = ctx.partition()[Blocks::U1];
  const std::uint32_t u = u1[u_slot];
  const auto& members = rings.ring[u_slot];
  const auto& deltas = rings.ring_delta[u_slot];
  std::vector<std::uint32_t> out;
  const float cu = rings.proxy2_cn(v_slot, u);
  if (std::isnan(cu)) return out;  // empty proxy set: nothing certifiable
  for (std::size_t k = 0; k < members.size(); ++k) {
    const float cup = rings.proxy2_cn(v_slot, members[k]);
    const double thresh = P.screening_factor *
                          (static_cast<double>(deltas[k]) * deltas[k]) /
                          static_cast<double>(delta_uv);
    if (std::abs(static_cast<double>(cup) - cu) < thresh)
      out.push_back(members[k]);
  }
  return out;
}

std::vector<Candidate> candidate_set(const PipelineContext& ctx,
                                     const RingSystem& rings,
                                     std::uint32_t v_slot,
                                     const AnchorSpec& anchor) {
  const PipelineParams& P = ctx.params();
  auto v1 = ctx.partition()[Blocks::V1];
  auto u1 = ctx.partition()[Blocks::U1];
  const std::uint32_t v = v1[v_slot];
  std::vector<Candidate> out;
  for (const auto& e : rings.meso_by_v[v_slot]) {
    auto R = screened_ring(ctx, rings, v_slot, e.u1_slot, e.delta_uv);
    if (R.empty()) continue;
    double val = ctx.cn_of(R, v);
    if (std::abs(val - anchor.p1) <= P.candidate_tol) {
      Candidate c;
      c.u = u1[e.u1_slot];
      c.R = std::move(R);
      c.cn_v = val;
      out.push_back(std::move(c));
    }
  }
  return out;
}

LocalEstimate local_estimate_known_p(const PipelineContext& ctx,
                                     const std::vector<Candidate>& cands,
                                     const AnchorSpec& anchor,
                                     std::uint32_t w) {
  const PipelineParams& P = ctx.params();
  const LinkFunction& link = ctx.graph().link;
  LocalEstimate est;
  if (cands.empty()) {
    est.reason = NoEstimate::EmptyCandidates;
    return est;
  }
  bool any = false;
  double best = -std::numeric_limits<double>::infinity();
  std::uint32_t best_u = 0;
  for (const auto& c : cands) {
    if (std::find(c.R.begin(), c.R.end(), w) != c.R.end())
      continue;  // w cannot be averaged against itself
    double val = ctx.cn_of(c.R, w);
    if (!any || val > best || (val == best && c.u < best_u)) {
      best = val;
      best_u = c.u;
      any = true;
    }
  }
  if (!any) {
    est.reason = NoEstimate::EmptyRings;
    return est;
  }
  est.M = best;
  est.argmax_u = best_u;
  const double y_hi = link(0.0);
  const double y_lo = link(link.r_p());
  if (best > y_hi + P.range_tol || best < y_lo - P.range_tol) {
    est.reason = NoEstimate::OutOfRange;
    return est;
  }
  est.dhat = anchor.s1 - link.inverse_on_bilipschitz(best);
  return est;
}

LocalTable build_local_table_known_p(const PipelineContext& ctx,
                                     const RingSystem& rings,
                                     const AnchorSpec& anchor) {
  auto v1 = ctx.partition()[Blocks::V1];
  std::vector<std::int64_t> v1_slot(ctx.graph().points.size(), -1);
  for (std::size_t i = 0; i < v1.size(); ++i)
    v1_slot[v1[i]] = static_cast<std::int64_t>(i);

  // Group tar pairs by endpoint so each candidate set is built once.
  std::vector<std::vector<std::pair<std::uint32_t, std::size_t>>> by_slot(
      v1.size());
  for (std::size_t t = 0; t < rings.tar.size(); ++t) {
    auto [a, b] = rings.tar[t];
    by_slot[static_cast<std::size_t>(v1_slot[a])].push_back({b, t});
    by_slot[static_cast<std::size_t>(v1_slot[b])].push_back({a, t});
  }

  std::vector<double> dir_sum(rings.tar.size(), 0.0);
  std::vector<std::uint8_t> dir_cnt(rings.tar.size(), 0);
  std::mutex merge_mutex;
  parallel_for(0, v1.size(), [&](std::size_t i) {
    if (by_slot[i].empty()) return;
    auto cands =
        candidate_set(ctx, rings, static_cast<std::uint32_t>(i), anchor);
    std::vector<std::pair<std::size_t, double>> got;
    for (auto [w, t] : by_slot[i]) {
      auto est = local_estimate_known_p(ctx, cands, anchor, w);
      if (est.dhat) got.push_back({t, *est.dhat});
    }
    std::lock_guard<std::mutex> lock(merge_mutex);
    for (auto [t, d] : got) {
      dir_sum[t] += d;
      dir_cnt[t] += 1;
    }
  });

  LocalTable table;
  table.attempted = rings.tar.size();
  table.attempted_pairs = rings.tar;
  for (std::size_t t = 0; t < rings.tar.size(); ++t) {
    if (dir_cnt[t] == 0) {
      ++table.no_estimate;
      continue;
    }
    table.entries.push_back(
        {rings.tar[t].first, rings.tar[t].second, dir_sum[t] / dir_cnt[t]});
  }
  return table;
}

std::optional<double> naive_cluster_estimate(const PipelineContext& ctx,
                                             const RingSystem& rings,
                                             std::uint32_t v_slot,
                                             std::uint32_t w) {
  const auto& members = rings.proxy2[v_slot];
  if (members.empty()) return std::nullopt;
  if (std::find(members.begin(), members.end(), w) != members.end())
    return std::nullopt;
  double val = ctx.cn_of(members, w);
  return ctx.graph().link.inverse_on_bilipschitz(val);
}

ProxyBilipschitzReport proxy_bilipschitz_report(const PipelineContext& ctx,
                                                double band_lo,
                                                double band_hi) {
  const GraphSample& g = ctx.graph();
  const Blocks& blocks = ctx.partition();
  std::vector<std::uint32_t> rest;
  for (auto id : {Blocks::V1, Blocks::V2, Blocks::U1, Blocks::U2})
    for (auto v : blocks[id]) rest.push_back(v);

  ProxyBilipschitzReport rep;
  rep.band_lo = band_lo;
  rep.band_hi = band_hi;
  rep.C = ctx.params().C_proxy;
  std::vector<std::size_t> in_band(rest.size(), 0), ok(rest.size(), 0);
  parallel_for(0, rest.size(), [&](std::size_t i) {
    for (std::size_t j = i + 1; j < rest.size(); ++j) {
      double dl = ctx.delta_cn_upto(rest[i], rest[j], band_hi);
      if (dl > band_hi || dl < band_lo) continue;
      ++in_band[i];
      double ratio = g.latent_distance(rest[i], rest[j]) / dl;
      if (ratio >= 1.0 / rep.C - 1e-12 && ratio <= rep.C + 1e-12) ++ok[i];
    }
  });
  for (std::size_t i = 0; i < rest.size(); ++i) {
    rep.pairs_in_band += in_band[i];
    rep.pairs_ok += ok[i];
  }
  rep.fraction_ok = rep.pairs_in_band
                        ? static_cast<double>(rep.pairs_ok) / rep.pairs_in_band
                        : 1.0;
  return rep;
}

SlabOccupancyReport slab_occupancy_report(const PipelineContext& ctx,
                                          std::size_t n_samples,
                                          std::uint64_t seed) {
  const GraphSample& g = ctx.graph();
  const PipelineParams& P = ctx.params();
  SlabOccupancyReport rep;
  rep.samples = n_samples;
  const int d = g.spec.dimension;
  rep.paper_bound = static_cast<double>(g.n_block) *
                    std::pow(P.delta_n, 5.0 * d) * std::pow(P.xi, d + 1);
  auto s = rng::Stream::keyed(seed, 0x736c6162ull);
  const std::size_t N = g.points.size();
  double total = 0.0;
  for (std::size_t k = 0; k < n_samples; ++k) {
    auto w = static_cast<std::uint32_t>(s.below(N));
    auto v = static_cast<std::uint32_t>(s.below(N));
    if (w == v) v = (v + 1) % static_cast<std::uint32_t>(N);
    Geodesic geo(g.spec, g.point(w), g.point(v));
    double t = s.uniform(0.0, std::max(geo.length(), 1e-9));
    SlabSpec slab = P.default_slab(t);
    std::size_t block_min = std::numeric_limits<std::size_t>::max();
    for (int b = 0; b < 5; ++b) {
      std::size_t count = 0;
      for (auto x : ctx.partition().sets[b])
        if (slab_contains(geo, slab, g.point(x))) ++count;
      block_min = std::min(block_min, count);
      total += static_cast<double>(count);
    }
    rep.min_count = std::min(rep.min_count, block_min);
    if (static_cast<double>(block_min) < rep.paper_bound) ++rep.below_bound;
  }
  rep.mean_count = n_samples ? total / (5.0 * n_samples) : 0.0;
  return rep;
}

}  // namespace orderlab
