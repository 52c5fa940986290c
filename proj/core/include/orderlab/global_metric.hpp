#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "orderlab/unknown_link.hpp"

// Extension of local estimates to all pairs: block covering, chain
// diagnostics, edge inflation, and shortest-path completion.

namespace orderlab {

struct LocalEstimateTable {
  struct Entry {
    std::uint32_t v, w;  // v < w
    double dhat;
    std::uint16_t run;  // which block-run produced it
  };
  std::vector<Entry> entries;
  std::size_t attempted = 0;    // distinct tar pairs seen across runs
  std::size_t no_estimate = 0;  // pairs every run failed to estimate
  double epsilon = 0.0;         // edge inflation used downstream
};

struct BlockCoverPlan {
  std::size_t N = 0;
  std::size_t block_size = 0;  // floor(lambda N / 2)
  std::size_t r = 0;           // ceil(N / block_size)
  std::size_t runs = 0;        // r choose 2
  std::vector<std::vector<std::uint32_t>> blocks;
  std::vector<std::uint32_t> order;  // seeded permutation of the vertices
};

BlockCoverPlan make_block_cover_plan(std::size_t N, double lambda,
                                     std::uint64_t algo_seed);

// Partition for one block pair: V1 = padded union of the two blocks (size m),
// the remaining four blocks drawn from the unused vertices.
Blocks cover_run_partition(const BlockCoverPlan& plan, std::size_t i,
                           std::size_t j, std::size_t* m_out = nullptr);

using LocalRoutine =
    std::function<LocalTable(const GraphSample&, const Blocks&)>;

// Runs the local routine on every block pair (lexicographic order) and takes
// the first-writer union of the outputs.
LocalEstimateTable block_cover_local(const GraphSample& g,
                                     const LocalRoutine& routine,
                                     double lambda, std::uint64_t algo_seed);

// All-pairs metric produced by shortest paths; symmetric, zero diagonal,
// +infinity on unreachable pairs.
struct GlobalMetric {
  std::size_t N = 0;
  std::vector<std::uint32_t> vertex_ids;  // metric index -> input vertex id
  std::vector<double> d;                  // packed upper triangle, i < j

  double get(std::size_t i, std::size_t j) const {
    if (i == j) return 0.0;
    if (i > j) std::swap(i, j);
    return d[i * N - i * (i + 1) / 2 + (j - i - 1)];
  }
  void set(std::size_t i, std::size_t j, double v) {
    if (i > j) std::swap(i, j);
    d[i * N - i * (i + 1) / 2 + (j - i - 1)] = v;
  }
  std::size_t unreachable_pairs() const;
};

// Shortest-path extension over the estimate graph with edge weights
// max(dhat + epsilon, 0). `ids` gives the vertex universe (indices of the
// metric); entries must reference ids.
GlobalMetric shortest_path_extend(const LocalEstimateTable& table,
                                  std::span<const std::uint32_t> ids,
                                  double epsilon);

// Single-source distances (metric row) for sampled evaluation.
std::vector<double> shortest_path_row(const LocalEstimateTable& table,
                                      std::span<const std::uint32_t> ids,
                                      double epsilon, std::size_t source_index);

struct ChainReport {
  std::size_t pairs = 0;
  std::size_t chains_built = 0;
  double max_hop = 0.0;
  std::size_t max_hops = 0;
  double worst_hop_bound_ratio = 0.0;  // k / (2 d / r)
  double worst_length_defect = 0.0;    // |sum hops - d| per pair
  double defect_bound = 0.0;           // C k xi^2 / r_G at the worst pair
  std::size_t slab_misses = 0;  // slab empty, fell back to nearest sample
};

// Greedy geodesic chains through slab-hitting samples at spacing about
// step = tar_max/2 (informational at desk scale).
ChainReport chain_exists_report(const GraphSample& g,
                                const PipelineParams& params,
                                std::size_t n_pairs, std::uint64_t seed);

enum class PipelineMode { KnownLink, UnknownLink };

struct StageTimings {
  std::vector<std::pair<std::string, double>> seconds;
  double total = 0.0;
  void add(const std::string& stage, double s) {
    seconds.push_back({stage, s});
    total += s;
  }
};

struct AssembleOptions {
  PipelineMode mode = PipelineMode::KnownLink;
  CnMode cn_mode = CnMode::Observable;
  ClusterParams cluster;
  PipelineParams pipeline;
  UnknownLinkParams unknown;
  double lambda = 0.2;  // block-cover fraction
  bool use_cover = true;  // false: single run on the default partition,
                          // extension over V1 only
  std::optional<double> epsilon_override;
  bool evaluation_mode = false;  // latent positions may be consulted for
                                 // epsilon calibration and the fitted R
  double coverage_abort = 0.5;
};

struct AssembleResult {
  GlobalMetric metric;
  LocalEstimateTable table;
  double R = 1.0;       // 1 in known mode; fitted in evaluation mode
  bool R_known = true;  // false: unknown dilation (blind unknown-link runs)
  StageTimings timings;
  std::size_t tar_attempted = 0;
  std::size_t tar_estimated = 0;
  double q_star = 0.0;           // unknown mode
  std::size_t qbar_repairs = 0;  // unknown mode
};

// Full pipeline: clustering -> rings -> local estimates (known or unknown
// link) -> block cover -> shortest-path extension. Aborts (PipelineAbort)
// when estimate coverage falls below coverage_abort.
AssembleResult assemble_theorem_estimate(const GraphSample& g,
                                         const AssembleOptions& options);

}  // namespace orderlab
