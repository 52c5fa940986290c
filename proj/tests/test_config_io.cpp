#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "orderlab/bundle.hpp"
#include "orderlab/config.hpp"
#include "support/presets.hpp"

using namespace orderlab;
using namespace orderlab::testsupport;
using nlohmann::json;

namespace {

json minimal_config() {
  return json{
      {"manifold", {{"kind", "flat_torus"}, {"dimension", 2}, {"scale", 1.0}}},
      {"link",
       {{"family", "linear_clamp"}, {"tau", 1.0}, {"floor", 0.0},
        {"r_p", 0.45}}},
      {"n_per_block", 100}};
}

}  // namespace

TEST_CASE("defaults are materialized and stable") {
  auto cfg = ExperimentConfig::from_json(minimal_config());
  CHECK(cfg.q_n == 1.0);
  CHECK(cfg.noise.kind == NoiseModel::Kind::Bernoulli);
  CHECK(cfg.mode == PipelineMode::KnownLink);
  CHECK(cfg.pipeline.delta_n ==
        doctest::Approx(1.0 / std::log(500.0)));
  CHECK(cfg.unknown.net_eligibility_max ==
        doctest::Approx(cfg.pipeline.tar_max));
  CHECK(cfg.cluster.r0 == doctest::Approx(0.05 * cfg.manifold.r_G()));

  // The resolved config re-parses to the identical resolved config.
  auto resolved = cfg.resolved_json();
  auto cfg2 = ExperimentConfig::from_json(resolved);
  CHECK(cfg2.resolved_json() == resolved);
  CHECK(cfg2.config_hash() == cfg.config_hash());
}

TEST_CASE("seed overrides keep derived constants") {
  auto cfg = ExperimentConfig::from_json(minimal_config());
  auto pipeline_before = cfg.pipeline.xi;
  auto hash_before = cfg.config_hash();
  cfg.seeds.edge = 777;
  CHECK(cfg.pipeline.xi == pipeline_before);
  CHECK(cfg.config_hash() != hash_before);  // hash tracks the seeds
}

TEST_CASE("unknown keys are rejected everywhere") {
  auto j = minimal_config();
  j["surprise"] = 1;
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), std::invalid_argument);

  j = minimal_config();
  j["manifold"]["extra"] = true;
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), std::invalid_argument);

  j = minimal_config();
  j["pipeline"] = {{"not_a_knob", 3.0}};
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), std::invalid_argument);
}

TEST_CASE("config validation errors") {
  auto j = minimal_config();
  j["q_n"] = 0.0;
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), std::invalid_argument);

  j = minimal_config();
  j["mode"] = "sideways";
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), std::invalid_argument);

  j = minimal_config();
  j["cluster"] = {{"r0", 0.01}, {"r0_factor", 0.5}};
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), std::invalid_argument);

  j = minimal_config();
  j["unknown"] = {{"N_dyadic", 40}};
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), std::invalid_argument);

  j = minimal_config();
  j["manifold"]["dimension"] = 1;
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), std::invalid_argument);
}

TEST_CASE("pipeline overrides: C_xi feeds xi unless xi is pinned") {
  auto j = minimal_config();
  j["pipeline"] = {{"C_xi", 0.0}};
  auto cfg = ExperimentConfig::from_json(j);
  CHECK(cfg.pipeline.xi == doctest::Approx(std::pow(1.0 / 100.0, 1.0 / 7.0)));

  j["pipeline"] = {{"C_xi", 0.0}, {"xi", 0.123}};
  auto cfg2 = ExperimentConfig::from_json(j);
  CHECK(cfg2.pipeline.xi == doctest::Approx(0.123));
}

TEST_CASE("graph bundle round trip is bit-exact") {
  auto dir = std::filesystem::temp_directory_path() / "orlb_test";
  std::filesystem::create_directories(dir);
  for (auto noise : {NoiseModel::bernoulli(), NoiseModel::none()}) {
    auto g = generate(desk_torus(), 25, desk_link(), noise, 0.8,
                      {123, 456, 789});
    auto path = (dir / "g.orlb").string();
    save_graph_bundle(path, g, "cafebabe");
    auto loaded = load_graph_bundle(path);
    CHECK(loaded.config_hash == "cafebabe");
    CHECK(loaded.graph.points.data == g.points.data);  // bit-exact
    CHECK(loaded.graph.Z == g.Z);
    CHECK(loaded.graph.q_n == g.q_n);
    CHECK(loaded.graph.n_block == g.n_block);
    CHECK(loaded.graph.seeds.latent == g.seeds.latent);
    for (int b = 0; b < 5; ++b)
      CHECK(loaded.graph.blocks.sets[b] == g.blocks.sets[b]);
    CHECK(loaded.graph.link.family() == g.link.family());
    CHECK(loaded.graph.spec.kind == g.spec.kind);
  }
  // Sparse storage round trip.
  GenerateOptions opt;
  opt.dense_cap_u8 = 10;
  auto gs = generate(desk_torus(), 20, desk_link(), NoiseModel::bernoulli(),
                     0.5, {9, 8, 7}, opt);
  auto path = (dir / "gs.orlb").string();
  save_graph_bundle(path, gs, "h");
  auto loaded = load_graph_bundle(path);
  CHECK(loaded.graph.Z == gs.Z);
}

TEST_CASE("metric blob and csv round trips") {
  auto dir = std::filesystem::temp_directory_path() / "orlb_test";
  std::filesystem::create_directories(dir);
  GlobalMetric m;
  m.N = 5;
  m.vertex_ids = {3, 7, 9, 12, 20};
  m.d.assign(10, 0.0);
  auto s = rng::Stream::keyed(5, 5);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = i + 1; j < 5; ++j) m.set(i, j, s.uniform(0.0, 2.0));
  m.set(0, 4, std::numeric_limits<double>::infinity());

  auto blob = (dir / "m.bin").string();
  save_metric_blob(blob, m, "deadbeef");
  auto mb = load_metric_blob(blob, "deadbeef");
  CHECK(mb.vertex_ids == m.vertex_ids);
  CHECK(mb.d == m.d);  // bit-exact
  CHECK_THROWS_AS(load_metric_blob(blob, "wronghash"), std::runtime_error);

  auto csv = (dir / "m.csv").string();
  save_metric_csv(csv, m);
  auto mc = load_metric_csv(csv);
  REQUIRE(mc.N == m.N);
  CHECK(mc.vertex_ids == m.vertex_ids);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = i + 1; j < 5; ++j)
      CHECK(mc.get(i, j) == m.get(i, j));  // %.17g round trip
}

TEST_CASE("atomic text write") {
  auto dir = std::filesystem::temp_directory_path() / "orlb_test";
  std::filesystem::create_directories(dir);
  auto path = (dir / "t.txt").string();
  atomic_write_text(path, "hello\n");
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "hello");
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
}

TEST_CASE("assemble options mirror the config") {
  auto j = minimal_config();
  j["mode"] = "unknown";
  j["cn_mode"] = "latent_oracle";
  j["assemble"] = {{"lambda", 0.1}, {"use_cover", false},
                   {"epsilon_override", 0.25}, {"coverage_abort", 0.3}};
  auto cfg = ExperimentConfig::from_json(j);
  auto opt = cfg.assemble_options();
  CHECK(opt.mode == PipelineMode::UnknownLink);
  CHECK(opt.cn_mode == CnMode::LatentOracle);
  CHECK(opt.lambda == 0.1);
  CHECK_FALSE(opt.use_cover);
  CHECK(opt.epsilon_override == 0.25);
  CHECK(opt.coverage_abort == 0.3);
}
