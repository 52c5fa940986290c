#include "orderlab/global_metric.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <queue>
#include <unordered_set>

#include "orderlab/parallel.hpp"
#include "orderlab/rng.hpp"

namespace orderlab {

namespace {

std::uint64_t pair_key(std::uint32_t i, std::uint32_t j) {
  if (i > j) std::swap(i, j);
  return (static_cast<std::uint64_t>(i) << 32) | j;
}

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace

BlockCoverPlan make_block_cover_plan(std::size_t N, double lambda,
                                     std::uint64_t algo_seed) {
  if (!(lambda > 0.0) || lambda > 0.2 + 1e-12)
    throw std::invalid_argument("block cover requires lambda in (0, 1/5]");
  BlockCoverPlan plan;
  plan.N = N;
  plan.block_size = static_cast<std::size_t>(std::floor(lambda * N / 2.0));
  if (plan.block_size == 0)
    throw std::invalid_argument("block cover: lambda N / 2 < 1");
  plan.r = (N + plan.block_size - 1) / plan.block_size;
  plan.runs = plan.r * (plan.r - 1) / 2;
  plan.order.resize(N);
  for (std::size_t i = 0; i < N; ++i)
    plan.order[i] = static_cast<std::uint32_t>(i);
  auto s = rng::Stream::keyed(algo_seed, 0x636f766572ull);
  for (std::size_t i = N; i > 1; --i)
    std::swap(plan.order[i - 1], plan.order[s.below(i)]);
  plan.blocks.resize(plan.r);
  for (std::size_t i = 0; i < N; ++i)
    plan.blocks[i / plan.block_size].push_back(plan.order[i]);
  return plan;
}

Blocks cover_run_partition(const BlockCoverPlan& plan, std::size_t i,
                           std::size_t j, std::size_t* m_out) {
  std::vector<std::uint32_t> S = plan.blocks[i];
  S.insert(S.end(), plan.blocks[j].begin(), plan.blocks[j].end());
  const std::size_t m = std::max(S.size(), plan.N / 10);
  if (5 * m > plan.N)
    throw std::invalid_argument("block cover: 5m exceeds the vertex count");
  std::vector<char> used(plan.N, 0);
  for (auto v : S) used[v] = 1;
  std::vector<std::uint32_t> s_prime = S;
  std::vector<std::uint32_t> filler;
  for (auto v : plan.order) {
    if (s_prime.size() >= m) break;
    if (!used[v]) {
      s_prime.push_back(v);
      used[v] = 1;
    }
  }
  std::vector<std::uint32_t> Y;
  for (auto v : plan.order) {
    if (Y.size() >= 4 * m) break;
    if (!used[v]) {
      Y.push_back(v);
      used[v] = 1;
    }
  }
  if (Y.size() < 4 * m)
    throw std::invalid_argument("block cover: not enough filler vertices");
  Blocks b;
  b.sets[Blocks::V1] = std::move(s_prime);
  b.sets[Blocks::V0].assign(Y.begin(), Y.begin() + m);
  b.sets[Blocks::V2].assign(Y.begin() + m, Y.begin() + 2 * m);
  b.sets[Blocks::U1].assign(Y.begin() + 2 * m, Y.begin() + 3 * m);
  b.sets[Blocks::U2].assign(Y.begin() + 3 * m, Y.begin() + 4 * m);
  if (m_out) *m_out = m;
  return b;
}

LocalEstimateTable block_cover_local(const GraphSample& g,
                                     const LocalRoutine& routine,
                                     double lambda, std::uint64_t algo_seed) {
  auto plan = make_block_cover_plan(g.n_total(), lambda, algo_seed);
  LocalEstimateTable out;
  std::unordered_set<std::uint64_t> have, attempted;
  std::uint16_t run_id = 0;
  for (std::size_t i = 0; i < plan.r; ++i) {
    for (std::size_t j = i + 1; j < plan.r; ++j, ++run_id) {
      Blocks part = cover_run_partition(plan, i, j);
      std::vector<char> in_s(g.n_total(), 0);
      for (auto v : plan.blocks[i]) in_s[v] = 1;
      for (auto v : plan.blocks[j]) in_s[v] = 1;
      LocalTable table = routine(g, part);
      for (auto [a, b] : table.attempted_pairs)
        if (in_s[a] && in_s[b]) attempted.insert(pair_key(a, b));
      for (const auto& e : table.entries) {
        if (!in_s[e.v] || !in_s[e.w]) continue;
        auto key = pair_key(e.v, e.w);
        if (have.count(key)) continue;  // first writer wins
        have.insert(key);
        out.entries.push_back({std::min(e.v, e.w), std::max(e.v, e.w), e.dhat,
                               run_id});
      }
    }
  }
  out.attempted = attempted.size();
  out.no_estimate = attempted.size() >= have.size()
                        ? attempted.size() - have.size()
                        : 0;
  return out;
}

std::size_t GlobalMetric::unreachable_pairs() const {
  std::size_t c = 0;
  for (double x : d)
    if (!std::isfinite(x)) ++c;
  return c;
}

namespace {

struct Csr {
  std::vector<std::size_t> offsets;
  std::vector<std::uint32_t> nbr;
  std::vector<double> w;
};

Csr build_csr(const LocalEstimateTable& table,
              std::span<const std::uint32_t> ids, double epsilon) {
  std::vector<std::int64_t> local(
      ids.empty() ? 0
                  : (*std::max_element(ids.begin(), ids.end()) + 1),
      -1);
  for (std::size_t i = 0; i < ids.size(); ++i)
    local[ids[i]] = static_cast<std::int64_t>(i);
  std::vector<std::size_t> deg(ids.size(), 0);
  auto resolve = [&](std::uint32_t v) -> std::int64_t {
    return v < local.size() ? local[v] : -1;
  };
  for (const auto& e : table.entries) {
    auto a = resolve(e.v), b = resolve(e.w);
    if (a < 0 || b < 0) continue;
    ++deg[a];
    ++deg[b];
  }
  Csr csr;
  csr.offsets.assign(ids.size() + 1, 0);
  for (std::size_t i = 0; i < ids.size(); ++i)
    csr.offsets[i + 1] = csr.offsets[i] + deg[i];
  csr.nbr.resize(csr.offsets.back());
  csr.w.resize(csr.offsets.back());
  std::vector<std::size_t> cursor(csr.offsets.begin(), csr.offsets.end() - 1);
  for (const auto& e : table.entries) {
    auto a = resolve(e.v), b = resolve(e.w);
    if (a < 0 || b < 0) continue;
    double weight = std::max(e.dhat + epsilon, 0.0);
    csr.nbr[cursor[a]] = static_cast<std::uint32_t>(b);
    csr.w[cursor[a]++] = weight;
    csr.nbr[cursor[b]] = static_cast<std::uint32_t>(a);
    csr.w[cursor[b]++] = weight;
  }
  return csr;
}

void dijkstra(const Csr& csr, std::size_t source, std::vector<double>& dist) {
  const double inf = std::numeric_limits<double>::infinity();
  dist.assign(csr.offsets.size() - 1, inf);
  dist[source] = 0.0;
  using Item = std::pair<double, std::uint32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  heap.push({0.0, static_cast<std::uint32_t>(source)});
  while (!heap.empty()) {
    auto [du, u] = heap.top();
    heap.pop();
    if (du > dist[u]) continue;
    for (std::size_t k = csr.offsets[u]; k < csr.offsets[u + 1]; ++k) {
      double nd = du + csr.w[k];
      auto v = csr.nbr[k];
      if (nd < dist[v]) {
        dist[v] = nd;
        heap.push({nd, v});
      }
    }
  }
}

}  // namespace

GlobalMetric shortest_path_extend(const LocalEstimateTable& table,
                                  std::span<const std::uint32_t> ids,
                                  double epsilon) {
  GlobalMetric m;
  m.N = ids.size();
  m.vertex_ids.assign(ids.begin(), ids.end());
  m.d.assign(m.N * (m.N - 1) / 2, std::numeric_limits<double>::infinity());
  Csr csr = build_csr(table, ids, epsilon);
  const unsigned jobs = default_jobs();
  parallel_for(
      0, m.N,
      [&](std::size_t src) {
        std::vector<double> dist;
        dijkstra(csr, src, dist);
        for (std::size_t j = src + 1; j < m.N; ++j) m.set(src, j, dist[j]);
      },
      jobs);
  return m;
}

std::vector<double> shortest_path_row(const LocalEstimateTable& table,
                                      std::span<const std::uint32_t> ids,
                                      double epsilon,
                                      std::size_t source_index) {
  Csr csr = build_csr(table, ids, epsilon);
  std::vector<double> dist;
  dijkstra(csr, source_index, dist);
  return dist;
}

ChainReport chain_exists_report(const GraphSample& g,
                                const PipelineParams& params,
                                std::size_t n_pairs, std::uint64_t seed) {
  ChainReport rep;
  const double step = 0.5 * params.tar_max / params.C_proxy;
  const double min_dist = 4.0 * step;
  auto s = rng::Stream::keyed(seed, 0x636861696eull);
  const std::size_t N = g.points.size();
  for (std::size_t trial = 0; trial < 40 * n_pairs && rep.pairs < n_pairs;
       ++trial) {
    auto v = static_cast<std::uint32_t>(s.below(N));
    auto w = static_cast<std::uint32_t>(s.below(N));
    if (v == w) continue;
    double d = g.latent_distance(v, w);
    if (d <= min_dist) continue;
    ++rep.pairs;
    // Choose k with (step/2) k < d <= k step, lambda in [1/2, 1].
    auto k = static_cast<std::size_t>(std::ceil(d / step));
    double lambda = d / (static_cast<double>(k) * step);
    Geodesic geo(g.spec, g.point(v), g.point(w));
    std::vector<std::uint32_t> chain{v};
    for (std::size_t i = 1; i < k; ++i) {
      double t = lambda * step * static_cast<double>(i);
      SlabSpec slab = params.default_slab(t);
      std::int64_t hit = -1;
      double best = std::numeric_limits<double>::infinity();
      std::int64_t nearest = -1;
      Point target = geo.at(t);
      for (std::uint32_t x = 0; x < N; ++x) {
        if (x == v || x == w) continue;
        double dx = geodesic_distance(g.spec, g.point(x), target);
        if (dx < best) {
          best = dx;
          nearest = x;
        }
        if (dx <= 2.0 * slab.rho_plus &&
            slab_contains(geo, slab, g.point(x))) {
          hit = x;
          break;
        }
      }
      if (hit < 0) {
        ++rep.slab_misses;
        hit = nearest;
      }
      chain.push_back(static_cast<std::uint32_t>(hit));
    }
    chain.push_back(w);
    ++rep.chains_built;
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
      double hop = g.latent_distance(chain[i], chain[i + 1]);
      total += hop;
      rep.max_hop = std::max(rep.max_hop, hop);
    }
    rep.max_hops = std::max(rep.max_hops, chain.size() - 1);
    double hop_bound = 2.0 * d / step;
    rep.worst_hop_bound_ratio = std::max(
        rep.worst_hop_bound_ratio, static_cast<double>(chain.size() - 1) /
                                        hop_bound);
    double defect = std::abs(total - d);
    if (defect > rep.worst_length_defect) {
      rep.worst_length_defect = defect;
      rep.defect_bound = params.C_anchor_dist *
                         static_cast<double>(chain.size() - 1) *
                         (params.xi * params.xi) / params.r_G;
    }
  }
  return rep;
}

namespace {

double percentile(std::vector<double> xs, double q) {
  if (xs.empty()) return 0.0;
  std::size_t k = static_cast<std::size_t>(q * (xs.size() - 1));
  std::nth_element(xs.begin(), xs.begin() + k, xs.end());
  return xs[k];
}

}  // namespace

AssembleResult assemble_theorem_estimate(const GraphSample& g,
                                         const AssembleOptions& opt) {
  AssembleResult res;
  double t0 = now_seconds();

  // Frozen unknown-link calibration shared across cover runs so every run's
  // estimates live on one scale.
  struct Calibration {
    AnchorSpec anchor;
    QbarTable qbar;
    double q_star = 0.0;
    std::size_t repairs = 0;
  };
  std::optional<Calibration> calib;

  LocalRoutine routine = [&](const GraphSample& gg,
                             const Blocks& part) -> LocalTable {
    auto clusters = build_clusters(gg, part, opt.cluster);
    PipelineContext ctx(gg, part, clusters, opt.pipeline, opt.cn_mode);
    auto rings = build_ring_system(ctx);
    if (opt.mode == PipelineMode::KnownLink) {
      auto anchor = known_link_anchor(gg.link, opt.pipeline);
      return build_local_table_known_p(ctx, rings, anchor);
    }
    if (!calib) {
      auto full = run_unknown_local(ctx, rings, opt.unknown);
      calib = Calibration{full.anchor, full.qbar, full.q_star,
                          static_cast<std::size_t>(full.qbar.repair_count)};
      res.q_star = full.q_star;
      res.qbar_repairs = calib->repairs;
      return full.table;
    }
    std::size_t clamped = 0;
    return unknown_table_with_calibration(ctx, rings, calib->anchor,
                                          calib->qbar, calib->q_star,
                                          opt.unknown, &clamped);
  };

  std::vector<std::uint32_t> ids;
  if (opt.use_cover) {
    res.table = block_cover_local(g, routine, opt.lambda, g.seeds.algo);
    ids.resize(g.n_total());
    for (std::size_t i = 0; i < ids.size(); ++i)
      ids[i] = static_cast<std::uint32_t>(i);
  } else {
    LocalTable t = routine(g, g.blocks);
    res.table.attempted = t.attempted;
    res.table.no_estimate = t.no_estimate;
    for (const auto& e : t.entries)
      res.table.entries.push_back({e.v, e.w, e.dhat, 0});
    ids.assign(g.blocks[Blocks::V1].begin(), g.blocks[Blocks::V1].end());
    std::sort(ids.begin(), ids.end());
  }
  res.tar_attempted = res.table.attempted;
  res.tar_estimated = res.table.entries.size();
  res.timings.add("local_estimates", now_seconds() - t0);

  if (res.tar_attempted == 0)
    throw PipelineAbort("assemble: no target pairs were produced");
  double coverage = static_cast<double>(res.tar_estimated) /
                    static_cast<double>(res.tar_attempted);
  if (coverage < opt.coverage_abort)
    throw PipelineAbort("assemble: estimate coverage " +
                        std::to_string(coverage) + " below threshold");

  // Dilation factor.
  t0 = now_seconds();
  if (opt.mode == PipelineMode::KnownLink) {
    res.R = 1.0;
    res.R_known = true;
  } else if (opt.evaluation_mode) {
    double num = 0.0, den = 0.0;
    for (const auto& e : res.table.entries) {
      double d = g.latent_distance(e.v, e.w);
      num += e.dhat * d;
      den += d * d;
    }
    res.R = den > 0 ? num / den : 1.0;
    res.R_known = false;
  } else {
    res.R = std::numeric_limits<double>::quiet_NaN();
    res.R_known = false;
  }

  // Edge inflation.
  double epsilon;
  if (opt.epsilon_override) {
    epsilon = *opt.epsilon_override;
  } else if (opt.evaluation_mode) {
    // 95th percentile of residuals on a held-out calibration slice.
    auto s = rng::Stream::keyed(g.seeds.algo, 0x657073696c6f6eull);
    std::vector<double> residuals;
    const std::size_t want = std::min<std::size_t>(
        2000, std::max<std::size_t>(1, res.table.entries.size() / 10));
    for (std::size_t k = 0; k < want; ++k) {
      const auto& e = res.table.entries[s.below(res.table.entries.size())];
      double scale = opt.mode == PipelineMode::KnownLink ? 1.0 : res.R;
      residuals.push_back(
          std::abs(e.dhat - scale * g.latent_distance(e.v, e.w)));
    }
    epsilon = percentile(std::move(residuals), 0.95);
  } else {
    epsilon = opt.mode == PipelineMode::KnownLink ? opt.pipeline.err_known()
                                                  : opt.unknown.err_unknown;
  }
  res.table.epsilon = epsilon;
  res.timings.add("calibration", now_seconds() - t0);

  t0 = now_seconds();
  res.metric = shortest_path_extend(res.table, ids, epsilon);
  res.timings.add("shortest_paths", now_seconds() - t0);
  return res;
}

}  // namespace orderlab
