#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "orderlab/global_metric.hpp"

namespace orderlab {

struct EvalOptions {
  double gw_order = 1.0;
  std::size_t probes = 1000;
  std::size_t max_pairs = 200000;
};

// The experiment configuration: schema-validated JSON in, fully-resolved
// canonical JSON out (every default materialized). Unknown keys are rejected.
struct ExperimentConfig {
  ManifoldSpec manifold = ManifoldSpec::flat_torus(2, 1.0, 0.45);
  NoiseModel noise = NoiseModel::bernoulli();
  double q_n = 1.0;
  std::size_t n_per_block = 500;
  Seeds seeds;
  PipelineMode mode = PipelineMode::KnownLink;
  CnMode cn_mode = CnMode::Observable;
  ClusterParams cluster;
  PipelineParams pipeline;    // resolved
  UnknownLinkParams unknown;  // resolved
  double lambda = 0.2;
  bool use_cover = true;
  bool evaluation_mode = true;
  std::optional<double> epsilon_override;
  double coverage_abort = 0.5;
  EvalOptions eval;
  std::string output_dir;

  LinkFunction link() const;

  // Parses, validates (unknown keys rejected), and resolves every default.
  // Derived pipeline constants are computed here, so later seed or mode
  // overrides do not disturb them.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::string& path);

  nlohmann::json resolved_json() const;
  std::string config_hash() const;  // FNV-1a 64 of the canonical dump

  AssembleOptions assemble_options() const;

 private:
  // Raw link parameters (the LinkFunction is rebuilt on demand).
  LinkFamily link_family_ = LinkFamily::LinearClamp;
  double link_tau_ = 1.0;
  double link_floor_ = 0.0;

  friend struct ConfigIO;
};

std::uint64_t fnv1a64(const std::string& s);

}  // namespace orderlab
