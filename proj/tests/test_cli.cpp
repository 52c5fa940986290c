#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

// End-to-end checks of the orderlab binary: exit codes, artifact layout,
// byte-identical regeneration, and report consistency.

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

#ifndef ORDERLAB_BIN
#define ORDERLAB_BIN "tools/orderlab"
#endif
#ifndef ORDERLAB_SOURCE_DIR
#define ORDERLAB_SOURCE_DIR "."
#endif

int run_cli(const std::string& args) {
  std::string cmd = std::string(ORDERLAB_BIN) + " " + args + " > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string smoke_config() {
  return std::string(ORDERLAB_SOURCE_DIR) + "/configs/smoke_torus.json";
}

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / "orderlab_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("generate is deterministic and byte-identical") {
  auto d1 = fresh_dir("gen1");
  auto d2 = fresh_dir("gen2");
  REQUIRE(run_cli("generate --config " + smoke_config() + " --out " +
                  d1.string()) == 0);
  REQUIRE(run_cli("generate --config " + smoke_config() + " --out " +
                  d2.string()) == 0);
  CHECK(slurp(d1 / "bundle.orlb") == slurp(d2 / "bundle.orlb"));
  CHECK(fs::exists(d1 / "resolved_config.json"));

  // Changing only the edge seed changes edges but not points.
  auto d3 = fresh_dir("gen3");
  REQUIRE(run_cli("generate --config " + smoke_config() +
                  " --seed-edge 999 --out " + d3.string()) == 0);
  CHECK(slurp(d1 / "bundle.orlb") != slurp(d3 / "bundle.orlb"));
}

TEST_CASE("run produces the report and matrices") {
  auto d = fresh_dir("run1");
  REQUIRE(run_cli("run --config " + smoke_config() + " --out " + d.string()) ==
          0);
  for (const char* f : {"resolved_config.json", "report.json", "report.txt",
                        "dhat.csv", "dhat.bin"})
    CHECK(fs::exists(d / f));
  json rep = json::parse(slurp(d / "report.json"));
  CHECK(rep["R"] == 1.0);
  CHECK(rep["tar_estimated"].get<std::size_t>() > 0);
  CHECK(rep["error"]["median"].get<double>() >= 0.0);
  CHECK(rep["timings"].size() >= 3);

  // Config hash stamps match between report and resolved config.
  json cfg = json::parse(slurp(d / "resolved_config.json"));
  CHECK(rep["config_hash"].get<std::string>().size() == 16);
}

TEST_CASE("run from a bundle refuses a mismatched config") {
  auto d = fresh_dir("run2");
  REQUIRE(run_cli("generate --config " + smoke_config() + " --out " +
                  d.string()) == 0);
  REQUIRE(run_cli("run --config " + smoke_config() + " --bundle " +
                  (d / "bundle.orlb").string() + " --out " + d.string()) == 0);
  // Seed override changes the resolved config: the bundle must be refused.
  CHECK(run_cli("run --config " + smoke_config() + " --seed-latent 42" +
                " --bundle " + (d / "bundle.orlb").string() + " --out " +
                d.string()) == 2);
}

TEST_CASE("exit codes") {
  CHECK(run_cli("run --config /nonexistent.json") == 2);
  CHECK(run_cli("lemma-check --trials 50 --seed 1") == 0);
  CHECK(run_cli("lemma-check --trials 50 --seed 1 --selftest-corrupt") == 4);
}

TEST_CASE("evaluate re-scores persisted outputs consistently") {
  auto d = fresh_dir("eval1");
  REQUIRE(run_cli("generate --config " + smoke_config() + " --out " +
                  d.string()) == 0);
  REQUIRE(run_cli("run --config " + smoke_config() + " --bundle " +
                  (d / "bundle.orlb").string() + " --out " + d.string()) == 0);
  REQUIRE(run_cli("evaluate --bundle " + (d / "bundle.orlb").string() +
                  " --metric " + (d / "dhat.bin").string() +
                  " --probes 500 --out " + d.string()) == 0);
  json rep = json::parse(slurp(d / "report.json"));
  json ev = json::parse(slurp(d / "evaluate.json"));
  // Known-link runs carry R = 1; the re-fitted dilation should be close and
  // the volumetric scale identical (same persisted points and seeds).
  CHECK(ev["volumetric_scale"].get<double>() ==
        rep["volumetric_scale"].get<double>());
  CHECK(ev["fitted_R"].get<double>() > 0.5);
  CHECK(ev["fitted_R"].get<double>() < 2.0);
}

TEST_CASE("sweep emits rows and resumes") {
  auto d = fresh_dir("sweep1");
  REQUIRE(run_cli("sweep --config " + smoke_config() +
                  " --n-grid 50 --seeds 1,2 --out " + d.string()) == 0);
  json rows = json::parse(slurp(d / "sweep.json"));
  CHECK(rows.size() == 2);
  CHECK(fs::exists(d / "sweep.csv"));
  CHECK(fs::exists(d / "median_err.dat"));
  // Rerun: rows are not duplicated.
  REQUIRE(run_cli("sweep --config " + smoke_config() +
                  " --n-grid 50 --seeds 1,2 --out " + d.string()) == 0);
  json rows2 = json::parse(slurp(d / "sweep.json"));
  CHECK(rows2.size() == 2);
}
