#include "orderlab/bundle.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace orderlab {

namespace {

constexpr std::uint32_t kBundleMagic = 0x4f524c42;  // "ORLB"
constexpr std::uint32_t kBundleVersion = 1;
constexpr std::uint32_t kMetricMagic = 0x4f524c4d;  // "ORLM"

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw std::runtime_error("bundle: truncated file");
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string take_string(std::istream& is) {
  auto n = take<std::uint64_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("bundle: truncated string");
  return s;
}

class AtomicFile {
 public:
  explicit AtomicFile(const std::string& path)
      : path_(path), tmp_(path + ".tmp"), out_(tmp_, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open " + tmp_);
  }
  std::ofstream& stream() { return out_; }
  void commit() {
    out_.flush();
    if (!out_) throw std::runtime_error("write failed: " + tmp_);
    out_.close();
    std::filesystem::rename(tmp_, path_);
  }

 private:
  std::string path_, tmp_;
  std::ofstream out_;
};

}  // namespace

void atomic_write_text(const std::string& path, const std::string& content) {
  AtomicFile f(path);
  f.stream().write(content.data(),
                   static_cast<std::streamsize>(content.size()));
  f.commit();
}

void save_graph_bundle(const std::string& path, const GraphSample& g,
                       const std::string& config_hash) {
  AtomicFile f(path);
  auto& os = f.stream();
  put(os, kBundleMagic);
  put(os, kBundleVersion);
  put_string(os, config_hash);

  put<std::uint8_t>(os, g.spec.kind == ManifoldKind::FlatTorus ? 0 : 1);
  put<std::int32_t>(os, g.spec.dimension);
  put(os, g.spec.scale);
  put(os, g.spec.r_p);

  put<std::uint8_t>(os, static_cast<std::uint8_t>(g.link.family()));
  put(os, g.link.param_tau());
  put(os, g.link.param_floor());

  put<std::uint8_t>(os, static_cast<std::uint8_t>(g.noise.kind));
  put(os, g.noise.sigma);
  put(os, g.q_n);
  put<std::uint64_t>(os, g.n_block);
  put(os, g.seeds.latent);
  put(os, g.seeds.edge);
  put(os, g.seeds.algo);

  put<std::int32_t>(os, g.points.stride);
  put<std::uint64_t>(os, g.points.data.size());
  os.write(reinterpret_cast<const char*>(g.points.data.data()),
           static_cast<std::streamsize>(g.points.data.size() * 8));

  for (const auto& set : g.blocks.sets) {
    put<std::uint64_t>(os, set.size());
    os.write(reinterpret_cast<const char*>(set.data()),
             static_cast<std::streamsize>(set.size() * 4));
  }

  put<std::uint8_t>(os, static_cast<std::uint8_t>(g.Z.storage()));
  switch (g.Z.storage()) {
    case EdgeMatrix::Storage::Empty:
      break;
    case EdgeMatrix::Storage::DenseU8: {
      const auto& raw = g.Z.raw_u8();
      put<std::uint64_t>(os, raw.size());
      os.write(reinterpret_cast<const char*>(raw.data()),
               static_cast<std::streamsize>(raw.size()));
      break;
    }
    case EdgeMatrix::Storage::DenseF64: {
      const auto& raw = g.Z.raw_f64();
      put<std::uint64_t>(os, raw.size());
      os.write(reinterpret_cast<const char*>(raw.data()),
               static_cast<std::streamsize>(raw.size() * 8));
      break;
    }
    case EdgeMatrix::Storage::SparsePairs: {
      // Sorted for byte-identical output across runs.
      std::map<std::uint64_t, double> sorted(g.Z.raw_sparse().begin(),
                                             g.Z.raw_sparse().end());
      put<std::uint64_t>(os, sorted.size());
      for (const auto& [k, v] : sorted) {
        put(os, k);
        put(os, v);
      }
      break;
    }
  }
  f.commit();
}

GraphBundle load_graph_bundle(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  if (take<std::uint32_t>(is) != kBundleMagic)
    throw std::runtime_error("bundle: bad magic in " + path);
  if (take<std::uint32_t>(is) != kBundleVersion)
    throw std::runtime_error("bundle: unsupported version in " + path);
  GraphBundle b;
  b.config_hash = take_string(is);

  GraphSample& g = b.graph;
  g.spec.kind =
      take<std::uint8_t>(is) == 0 ? ManifoldKind::FlatTorus : ManifoldKind::Sphere;
  g.spec.dimension = take<std::int32_t>(is);
  g.spec.scale = take<double>(is);
  g.spec.r_p = take<double>(is);

  auto fam = static_cast<LinkFamily>(take<std::uint8_t>(is));
  double tau = take<double>(is);
  double floor = take<double>(is);
  switch (fam) {
    case LinkFamily::ExpDecay:
      g.link = LinkFunction::exp_decay(tau, g.spec.r_p, g.spec.diameter());
      break;
    case LinkFamily::LinearClamp:
      g.link =
          LinkFunction::linear_clamp(tau, floor, g.spec.r_p, g.spec.diameter());
      break;
    case LinkFamily::NegativeDistance:
      g.link = LinkFunction::negative_distance(g.spec.diameter());
      break;
  }

  g.noise.kind = static_cast<NoiseModel::Kind>(take<std::uint8_t>(is));
  g.noise.sigma = take<double>(is);
  g.q_n = take<double>(is);
  g.n_block = take<std::uint64_t>(is);
  g.seeds.latent = take<std::uint64_t>(is);
  g.seeds.edge = take<std::uint64_t>(is);
  g.seeds.algo = take<std::uint64_t>(is);

  g.points.stride = take<std::int32_t>(is);
  g.points.data.resize(take<std::uint64_t>(is));
  is.read(reinterpret_cast<char*>(g.points.data.data()),
          static_cast<std::streamsize>(g.points.data.size() * 8));

  for (auto& set : g.blocks.sets) {
    set.resize(take<std::uint64_t>(is));
    is.read(reinterpret_cast<char*>(set.data()),
            static_cast<std::streamsize>(set.size() * 4));
  }

  auto storage = static_cast<EdgeMatrix::Storage>(take<std::uint8_t>(is));
  g.Z.init(g.n_total(), storage);
  switch (storage) {
    case EdgeMatrix::Storage::Empty:
      break;
    case EdgeMatrix::Storage::DenseU8: {
      g.Z.raw_u8().resize(take<std::uint64_t>(is));
      is.read(reinterpret_cast<char*>(g.Z.raw_u8().data()),
              static_cast<std::streamsize>(g.Z.raw_u8().size()));
      break;
    }
    case EdgeMatrix::Storage::DenseF64: {
      g.Z.raw_f64().resize(take<std::uint64_t>(is));
      is.read(reinterpret_cast<char*>(g.Z.raw_f64().data()),
              static_cast<std::streamsize>(g.Z.raw_f64().size() * 8));
      break;
    }
    case EdgeMatrix::Storage::SparsePairs: {
      auto count = take<std::uint64_t>(is);
      for (std::uint64_t i = 0; i < count; ++i) {
        auto k = take<std::uint64_t>(is);
        auto v = take<double>(is);
        g.Z.raw_sparse()[k] = v;
      }
      break;
    }
  }
  if (!is) throw std::runtime_error("bundle: truncated payload in " + path);
  return b;
}

void save_metric_blob(const std::string& path, const GlobalMetric& m,
                      const std::string& config_hash) {
  AtomicFile f(path);
  auto& os = f.stream();
  put(os, kMetricMagic);
  put_string(os, config_hash);
  put<std::uint64_t>(os, m.N);
  os.write(reinterpret_cast<const char*>(m.vertex_ids.data()),
           static_cast<std::streamsize>(m.vertex_ids.size() * 4));
  put<std::uint64_t>(os, m.d.size());
  os.write(reinterpret_cast<const char*>(m.d.data()),
           static_cast<std::streamsize>(m.d.size() * 8));
  f.commit();
}

GlobalMetric load_metric_blob(const std::string& path,
                              const std::string& expect_hash) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  if (take<std::uint32_t>(is) != kMetricMagic)
    throw std::runtime_error("metric blob: bad magic in " + path);
  std::string hash = take_string(is);
  if (!expect_hash.empty() && hash != expect_hash)
    throw std::runtime_error("metric blob: config hash mismatch (" + hash +
                             " vs " + expect_hash + ")");
  GlobalMetric m;
  m.N = take<std::uint64_t>(is);
  m.vertex_ids.resize(m.N);
  is.read(reinterpret_cast<char*>(m.vertex_ids.data()),
          static_cast<std::streamsize>(m.N * 4));
  m.d.resize(take<std::uint64_t>(is));
  is.read(reinterpret_cast<char*>(m.d.data()),
          static_cast<std::streamsize>(m.d.size() * 8));
  if (!is) throw std::runtime_error("metric blob: truncated " + path);
  return m;
}

void save_metric_csv(const std::string& path, const GlobalMetric& m) {
  std::ostringstream os;
  os << "v,w,dhat\n";
  char buf[64];
  for (std::size_t i = 0; i < m.N; ++i) {
    for (std::size_t j = i + 1; j < m.N; ++j) {
      std::snprintf(buf, sizeof buf, "%u,%u,%.17g\n", m.vertex_ids[i],
                    m.vertex_ids[j], m.get(i, j));
      os << buf;
    }
  }
  atomic_write_text(path, os.str());
}

GlobalMetric load_metric_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string header;
  std::getline(is, header);
  std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> rows;
  std::uint32_t v, w;
  std::map<std::uint32_t, std::size_t> ids;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    double d;
    if (std::sscanf(line.c_str(), "%u,%u,%lg", &v, &w, &d) != 3)
      throw std::runtime_error("metric csv: bad row '" + line + "'");
    rows.emplace_back(v, w, d);
    ids.emplace(v, 0);
    ids.emplace(w, 0);
  }
  GlobalMetric m;
  m.N = ids.size();
  m.vertex_ids.reserve(m.N);
  std::size_t next = 0;
  for (auto& [id, slot] : ids) {
    slot = next++;
    m.vertex_ids.push_back(id);
  }
  m.d.assign(m.N * (m.N - 1) / 2, std::numeric_limits<double>::infinity());
  for (auto& [a, b, d] : rows) m.set(ids[a], ids[b], d);
  return m;
}

}  // namespace orderlab
