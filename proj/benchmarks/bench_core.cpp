#include <benchmark/benchmark.h>

#include "orderlab/clustering.hpp"
#include "orderlab/global_metric.hpp"
#include "orderlab/ring_pipeline.hpp"

using namespace orderlab;

namespace {

const ManifoldSpec kTorus = ManifoldSpec::flat_torus(2, 1.0, 0.45);
const ManifoldSpec kSphere = ManifoldSpec::sphere(3, 1.0, 0.5);

LinkFunction link() {
  return LinkFunction::linear_clamp(1.0, 0.0, 0.45, kTorus.diameter());
}

PipelineParams bench_params(const GraphSample& g) {
  auto p = PipelineParams::paper_defaults(g);
  p.proxy2_max = 0.05;
  p.ring_lo = 0.03;
  p.ring_hi = 0.08;
  p.meso_lo = 0.20;
  p.meso_hi = 0.42;
  p.tar_max = 0.10;
  p.anchor_s1 = 0.30;
  p.screening_factor = 1.5;
  p.candidate_tol = 0.05;
  return p;
}

void BM_GeodesicDistanceTorus(benchmark::State& state) {
  auto pts = sample_points(kTorus, 1024, 1);
  std::size_t i = 0;
  for (auto _ : state) {
    auto a = pts[i % 1024], b = pts[(i * 7 + 3) % 1024];
    benchmark::DoNotOptimize(geodesic_distance(kTorus, a, b));
    ++i;
  }
}
BENCHMARK(BM_GeodesicDistanceTorus);

void BM_GeodesicDistanceSphere(benchmark::State& state) {
  auto pts = sample_points(kSphere, 1024, 1);
  std::size_t i = 0;
  for (auto _ : state) {
    auto a = pts[i % 1024], b = pts[(i * 7 + 3) % 1024];
    benchmark::DoNotOptimize(geodesic_distance(kSphere, a, b));
    ++i;
  }
}
BENCHMARK(BM_GeodesicDistanceSphere);

void BM_ProjectToGeodesic(benchmark::State& state) {
  auto pts = sample_points(kSphere, 64, 2);
  Geodesic geo(kSphere, pts[0], pts[1]);
  std::size_t i = 2;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        project_to_geodesic(geo, pts[i % 64], 0.0, geo.length()));
    ++i;
  }
}
BENCHMARK(BM_ProjectToGeodesic);

void BM_EdgeGeneration(benchmark::State& state) {
  auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        generate(kTorus, n, link(), NoiseModel::bernoulli(), 1.0, {1, 2, 3}));
  }
  state.SetComplexityN(static_cast<std::int64_t>(5 * n));
}
BENCHMARK(BM_EdgeGeneration)->Arg(100)->Arg(200)->Arg(400)->Complexity();

void BM_DeltaCnScan(benchmark::State& state) {
  auto g = generate(kTorus, 400, link(), NoiseModel::bernoulli(), 1.0,
                    {1, 2, 3});
  ClusterParams cp;
  cp.method = ClusterMethod::Oracle;
  cp.r0 = 0.05 * kTorus.r_G();
  auto clusters = build_clusters(g, cp);
  PipelineContext ctx(g, g.blocks, clusters, bench_params(g),
                      CnMode::Observable);
  auto v1 = g.blocks[Blocks::V1];
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        ctx.delta_cn_upto(v1[i % 400], v1[(i * 13 + 7) % 400], 0.2));
    ++i;
  }
}
BENCHMARK(BM_DeltaCnScan);

void BM_ShortestPathExtend(benchmark::State& state) {
  auto n = static_cast<std::size_t>(state.range(0));
  auto g = generate(kTorus, n, link(), NoiseModel::none(), 1.0, {4, 5, 6});
  std::vector<std::uint32_t> ids(5 * n);
  for (std::size_t i = 0; i < ids.size(); ++i)
    ids[i] = static_cast<std::uint32_t>(i);
  LocalEstimateTable t;
  for (std::uint32_t a = 0; a < ids.size(); ++a)
    for (std::uint32_t b = a + 1; b < ids.size(); ++b)
      if (g.latent_distance(a, b) <= 0.1)
        t.entries.push_back({a, b, g.latent_distance(a, b), 0});
  for (auto _ : state) {
    benchmark::DoNotOptimize(shortest_path_extend(t, ids, 0.01));
  }
}
BENCHMARK(BM_ShortestPathExtend)->Arg(40)->Arg(80)->Unit(benchmark::kMillisecond);

void BM_CommonNeighborClusters(benchmark::State& state) {
  auto g = generate(ManifoldSpec::flat_torus(2, 1.0, 0.2), 300,
                    LinkFunction::linear_clamp(0.25, 0.0, 0.2, 0.71),
                    NoiseModel::bernoulli(), 1.0, {7, 8, 9});
  ClusterParams cp;
  cp.method = ClusterMethod::CommonNeighbor;
  cp.c_cn = 8.0;
  cp.r0 = 0.09;
  cp.lambda0 = 0.125;
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_clusters(g, cp));
  }
}
BENCHMARK(BM_CommonNeighborClusters)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
