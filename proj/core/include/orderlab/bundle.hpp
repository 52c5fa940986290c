#pragma once

#include <string>

#include "orderlab/global_metric.hpp"

// Binary persistence: graph bundles, metric blobs, and CSV export. All
// writes are atomic (temp file + rename) and every artifact carries the
// resolved-config hash so mixed-config artifacts are refused at load time.

namespace orderlab {

void atomic_write_text(const std::string& path, const std::string& content);

struct GraphBundle {
  GraphSample graph;
  std::string config_hash;
};

void save_graph_bundle(const std::string& path, const GraphSample& g,
                       const std::string& config_hash);
GraphBundle load_graph_bundle(const std::string& path);

void save_metric_blob(const std::string& path, const GlobalMetric& m,
                      const std::string& config_hash);
GlobalMetric load_metric_blob(const std::string& path,
                              const std::string& expect_hash = "");

// CSV rows "v,w,dhat" with round-trip-exact doubles (%.17g).
void save_metric_csv(const std::string& path, const GlobalMetric& m);
GlobalMetric load_metric_csv(const std::string& path);

}  // namespace orderlab
