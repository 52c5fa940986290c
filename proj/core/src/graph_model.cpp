#include "orderlab/graph_model.hpp"

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

std::string to_string(LinkFamily f) {
  switch (f) {
    case LinkFamily::ExpDecay: return "exp_decay";
    case LinkFamily::LinearClamp: return "linear_clamp";
    case LinkFamily::NegativeDistance: return "negative_distance";
  }
  return "?";
}

LinkFamily link_family_from_string(const std::string& s) {
  if (s == "exp_decay") return LinkFamily::ExpDecay;
  if (s == "linear_clamp") return LinkFamily::LinearClamp;
  if (s == "negative_distance") return LinkFamily::NegativeDistance;
  throw std::invalid_argument("unknown link family: " + s);
}

std::string to_string(NoiseModel::Kind k) {
  switch (k) {
    case NoiseModel::Kind::Bernoulli: return "bernoulli";
    case NoiseModel::Kind::GaussianAdditive: return "gaussian";
    case NoiseModel::Kind::None: return "none";
  }
  return "?";
}

NoiseModel::Kind noise_kind_from_string(const std::string& s) {
  if (s == "bernoulli") return NoiseModel::Kind::Bernoulli;
  if (s == "gaussian") return NoiseModel::Kind::GaussianAdditive;
  if (s == "none") return NoiseModel::Kind::None;
  throw std::invalid_argument("unknown noise kind: " + s);
}

LinkFunction LinkFunction::exp_decay(double tau, double r_p, double diam) {
  if (!(tau > 0)) throw std::invalid_argument("exp_decay: tau must be positive");
  LinkFunction p;
  p.family_ = LinkFamily::ExpDecay;
  p.tau_ = tau;
  p.r_p_ = r_p;
  p.L_p_ = 1.0 / tau;
  p.ell_p_ = std::exp(-r_p / tau) / tau;
  p.M_p_ = 1.0;
  (void)diam;
  p.validate();
  return p;
}

LinkFunction LinkFunction::linear_clamp(double tau, double floor, double r_p,
                                        double diam) {
  if (!(tau > 0)) throw std::invalid_argument("linear_clamp: tau must be positive");
  if (floor < 0 || floor >= 1)
    throw std::invalid_argument("linear_clamp: floor must be in [0,1)");
  if (!(r_p < tau * (1.0 - floor)))
    throw std::invalid_argument("linear_clamp: requires r_p < tau (1 - floor)");
  LinkFunction p;
  p.family_ = LinkFamily::LinearClamp;
  p.tau_ = tau;
  p.floor_ = floor;
  p.r_p_ = r_p;
  p.L_p_ = p.ell_p_ = 1.0 / tau;
  p.M_p_ = 1.0;
  (void)diam;
  p.validate();
  return p;
}

LinkFunction LinkFunction::negative_distance(double diam) {
  LinkFunction p;
  p.family_ = LinkFamily::NegativeDistance;
  p.r_p_ = diam;
  p.L_p_ = p.ell_p_ = 1.0;
  p.M_p_ = diam;
  p.validate();
  return p;
}

double LinkFunction::operator()(double t) const {
  switch (family_) {
    case LinkFamily::ExpDecay: return std::exp(-t / tau_);
    case LinkFamily::LinearClamp: return std::max(1.0 - t / tau_, floor_);
    case LinkFamily::NegativeDistance: return -t;
  }
  return 0.0;
}

bool LinkFunction::range_in_unit_interval() const {
  return family_ != LinkFamily::NegativeDistance;
}

double LinkFunction::inverse_on_bilipschitz(double y) const {
  const LinkFunction& p = *this;
  double lo = 0.0, hi = r_p_;
  double y_hi = p(lo), y_lo = p(hi);  // p decreasing: p(0) >= p(r_p)
  y = std::clamp(y, y_lo, y_hi);
  while (hi - lo > 1e-12) {
    double mid = 0.5 * (lo + hi);
    if (p(mid) >= y)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

void LinkFunction::validate() const {
  const int kGrid = 1000;
  const LinkFunction& p = *this;
  double prev = p(0.0);
  for (int i = 1; i <= kGrid; ++i) {
    double t0 = r_p_ * (i - 1) / kGrid;
    double t1 = r_p_ * i / kGrid;
    double v = p(t1);
    if (v > prev + 1e-12)
      throw std::invalid_argument("link function is not non-increasing");
    double gap = std::abs(prev - v);
    double dt = t1 - t0;
    if (gap < ell_p_ * dt - 1e-9 || gap > L_p_ * dt + 1e-9)
      throw std::invalid_argument("link function violates bi-Lipschitz bounds");
    prev = v;
  }
}

void EdgeMatrix::init(std::size_t n, Storage storage) {
  n_ = n;
  storage_ = storage;
  u8_.clear();
  f64_.clear();
  sparse_.clear();
  if (storage == Storage::DenseU8) u8_.assign(n * n, 0);
  if (storage == Storage::DenseF64) f64_.assign(n * n, 0.0);
}

double EdgeMatrix::get(std::uint32_t i, std::uint32_t j) const {
  if (i == j) return 0.0;
  switch (storage_) {
    case Storage::DenseU8: return u8_[static_cast<std::size_t>(i) * n_ + j];
    case Storage::DenseF64: return f64_[static_cast<std::size_t>(i) * n_ + j];
    case Storage::SparsePairs: {
      auto it = sparse_.find(pair_key(i, j));
      return it == sparse_.end() ? 0.0 : it->second;
    }
    case Storage::Empty: break;
  }
  throw std::logic_error("EdgeMatrix: no edge storage materialized");
}

void EdgeMatrix::set_sym(std::uint32_t i, std::uint32_t j, double v) {
  if (i == j) return;
  switch (storage_) {
    case Storage::DenseU8:
      u8_[static_cast<std::size_t>(i) * n_ + j] = static_cast<std::uint8_t>(v);
      u8_[static_cast<std::size_t>(j) * n_ + i] = static_cast<std::uint8_t>(v);
      return;
    case Storage::DenseF64:
      f64_[static_cast<std::size_t>(i) * n_ + j] = v;
      f64_[static_cast<std::size_t>(j) * n_ + i] = v;
      return;
    case Storage::SparsePairs:
      if (v != 0.0) sparse_[pair_key(i, j)] = v;
      return;
    case Storage::Empty: break;
  }
  throw std::logic_error("EdgeMatrix: no edge storage materialized");
}

bool EdgeMatrix::operator==(const EdgeMatrix& other) const {
  return n_ == other.n_ && storage_ == other.storage_ && u8_ == other.u8_ &&
         f64_ == other.f64_ && sparse_ == other.sparse_;
}

Blocks Blocks::contiguous(std::size_t n_block) {
  Blocks b;
  for (int k = 0; k < 5; ++k) {
    b.sets[k].resize(n_block);
    for (std::size_t i = 0; i < n_block; ++i)
      b.sets[k][i] = static_cast<std::uint32_t>(k * n_block + i);
  }
  return b;
}

Blocks Blocks::from_permutation(std::span<const std::uint32_t> perm,
                                std::size_t n_block) {
  if (perm.size() != 5 * n_block)
    throw std::invalid_argument("blocks: permutation size mismatch");
  Blocks b;
  for (int k = 0; k < 5; ++k)
    b.sets[k].assign(perm.begin() + k * n_block,
                     perm.begin() + (k + 1) * n_block);
  return b;
}

bool GraphSample::sparsity_assumption_holds() const {
  double N = static_cast<double>(n_total());
  double logN = std::log(N);
  return q_n * N >= std::pow(logN, std::log(logN));
}

namespace {

EdgeMatrix::Storage pick_storage(std::size_t N, const NoiseModel& noise,
                                 const GenerateOptions& opt) {
  if (noise.kind == NoiseModel::Kind::Bernoulli && N <= opt.dense_cap_u8)
    return EdgeMatrix::Storage::DenseU8;
  if (noise.kind != NoiseModel::Kind::Bernoulli && N <= opt.dense_cap_f64)
    return EdgeMatrix::Storage::DenseF64;
  return EdgeMatrix::Storage::SparsePairs;
}

double draw_edge(const LinkFunction& link, const NoiseModel& noise, double q_n,
                 double dist, rng::Stream& s) {
  bool mask = s.bernoulli(q_n);
  double u = s.uniform01();
  double g = 0.0;
  if (noise.kind == NoiseModel::Kind::GaussianAdditive) g = s.normal();
  if (!mask) return 0.0;
  double p = link(dist);
  switch (noise.kind) {
    case NoiseModel::Kind::Bernoulli: return u <= p ? 1.0 : 0.0;
    case NoiseModel::Kind::GaussianAdditive: return p + noise.sigma * g;
    case NoiseModel::Kind::None: return p;
  }
  return 0.0;
}

void fill_edges(GraphSample& g, const GenerateOptions& opt) {
  const std::size_t N = g.n_total();
  auto storage = pick_storage(N, g.noise, opt);
  if (storage == EdgeMatrix::Storage::SparsePairs) {
    double expected = g.q_n * 0.5 * static_cast<double>(N) *
                      static_cast<double>(N - 1);
    if (expected > static_cast<double>(opt.sparse_entry_cap))
      throw std::runtime_error(
          "generate: graph exceeds the configured memory cap");
  }
  g.Z.init(N, storage);
  if (storage == EdgeMatrix::Storage::SparsePairs) {
    for (std::uint32_t u = 0; u < N; ++u) {
      for (std::uint32_t v = u + 1; v < N; ++v) {
        auto s = rng::Stream::keyed(g.seeds.edge, u, v);
        double z = draw_edge(g.link, g.noise, g.q_n, g.latent_distance(u, v), s);
        g.Z.set_sym(u, v, z);
      }
    }
    return;
  }
  parallel_for(0, N, [&](std::size_t ui) {
    auto u = static_cast<std::uint32_t>(ui);
    for (std::uint32_t v = u + 1; v < N; ++v) {
      auto s = rng::Stream::keyed(g.seeds.edge, u, v);
      double z = draw_edge(g.link, g.noise, g.q_n, g.latent_distance(u, v), s);
      if (z != 0.0) g.Z.set_sym(u, v, z);
    }
  });
}

}  // namespace

GraphSample generate_from_points(const ManifoldSpec& spec, PointArray points,
                                 std::size_t n_per_block,
                                 const LinkFunction& link,
                                 const NoiseModel& noise, double q_n,
                                 const Seeds& seeds,
                                 const GenerateOptions& options) {
  if (n_per_block < 1) throw std::invalid_argument("generate: n_per_block >= 1");
  if (!(q_n > 0.0) || q_n > 1.0)
    throw std::invalid_argument("generate: q_n must lie in (0, 1]");
  if (noise.kind == NoiseModel::Kind::Bernoulli && !link.range_in_unit_interval())
    throw std::invalid_argument(
        "generate: Bernoulli noise requires a [0,1]-valued link function");
  if (points.size() != 5 * n_per_block)
    throw std::invalid_argument("generate: points must cover 5n vertices");

  GraphSample g;
  g.spec = spec;
  g.link = link;
  g.noise = noise;
  g.q_n = q_n;
  g.n_block = n_per_block;
  g.seeds = seeds;
  g.points = std::move(points);

  const std::size_t N = g.n_total();
  std::vector<std::uint32_t> perm(N);
  for (std::size_t i = 0; i < N; ++i) perm[i] = static_cast<std::uint32_t>(i);
  auto bs = rng::Stream::keyed(seeds.algo, /*a=*/0x626c6f636b73ull);
  for (std::size_t i = N; i > 1; --i)
    std::swap(perm[i - 1], perm[bs.below(i)]);
  g.blocks = Blocks::from_permutation(perm, n_per_block);

  if (!options.points_only) fill_edges(g, options);
  return g;
}

GraphSample generate(const ManifoldSpec& spec, std::size_t n_per_block,
                     const LinkFunction& link, const NoiseModel& noise,
                     double q_n, const Seeds& seeds,
                     const GenerateOptions& options) {
  PointArray pts = sample_points(spec, 5 * n_per_block, seeds.latent);
  return generate_from_points(spec, std::move(pts), n_per_block, link, noise,
                              q_n, seeds, options);
}

void regenerate_edges(GraphSample& g, std::uint64_t edge_seed,
                      const GenerateOptions& options) {
  g.seeds.edge = edge_seed;
  fill_edges(g, options);
}

double cn(const GraphSample& g, std::span<const std::uint32_t> U,
          std::uint32_t v) {
  if (U.empty()) throw std::invalid_argument("cn: U must be non-empty");
  double sum = 0.0;
  switch (g.Z.storage()) {
    case EdgeMatrix::Storage::DenseU8: {
      const std::uint8_t* row = g.Z.row_u8(v);
      for (auto u : U) {
        if (u == v) throw std::invalid_argument("cn: v must not lie in U");
        sum += row[u];
      }
      break;
    }
    case EdgeMatrix::Storage::DenseF64: {
      const double* row = g.Z.row_f64(v);
      for (auto u : U) {
        if (u == v) throw std::invalid_argument("cn: v must not lie in U");
        sum += row[u];
      }
      break;
    }
    default:
      for (auto u : U) {
        if (u == v) throw std::invalid_argument("cn: v must not lie in U");
        sum += g.Z.get(u, v);
      }
  }
  return sum / (g.q_n * static_cast<double>(U.size()));
}

double acn(const GraphSample& g, std::span<const std::uint32_t> U,
           std::uint32_t v) {
  if (U.empty()) throw std::invalid_argument("acn: U must be non-empty");
  double sum = 0.0;
  for (auto u : U) {
    if (u == v) throw std::invalid_argument("acn: v must not lie in U");
    sum += g.link(g.latent_distance(u, v));
  }
  return sum / static_cast<double>(U.size());
}

double fe(const GraphSample& g, std::size_t U_size) {
  return std::log(static_cast<double>(g.n_total())) /
         std::sqrt(g.q_n * static_cast<double>(U_size));
}

}  // namespace orderlab
