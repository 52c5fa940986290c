#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "orderlab/manifold.hpp"

namespace orderlab {

enum class LinkFamily { ExpDecay, LinearClamp, NegativeDistance };

std::string to_string(LinkFamily f);
LinkFamily link_family_from_string(const std::string& s);

// Non-increasing link function p with bi-Lipschitz constants on [0, r_p].
class LinkFunction {
 public:
  // p(t) = exp(-t/tau); ell_p = exp(-r_p/tau)/tau, L_p = 1/tau.
  static LinkFunction exp_decay(double tau, double r_p, double diam);
  // p(t) = max(1 - t/tau, floor); requires r_p < tau (1 - floor), so
  // ell_p = L_p = 1/tau exactly on [0, r_p].
  static LinkFunction linear_clamp(double tau, double floor, double r_p,
                                   double diam);
  // p(t) = -t (noisy-distance model); ell_p = L_p = 1.
  static LinkFunction negative_distance(double diam);

  double operator()(double t) const;

  LinkFamily family() const { return family_; }
  double param_tau() const { return tau_; }
  double param_floor() const { return floor_; }

  double ell_p() const { return ell_p_; }
  double L_p() const { return L_p_; }
  double r_p() const { return r_p_; }
  double M_p() const { return M_p_; }

  bool range_in_unit_interval() const;  // required for Bernoulli edges

  // Monotone bisection inverse on [0, r_p] to 1e-12. The argument is clamped
  // into p([0, r_p]) first; callers enforce their own out-of-range tolerance.
  double inverse_on_bilipschitz(double y) const;

  // Construction-time check of monotonicity and the bi-Lipschitz sandwich on
  // a 1e3-point grid over [0, r_p]; throws std::invalid_argument.
  void validate() const;

 private:
  LinkFamily family_ = LinkFamily::LinearClamp;
  double tau_ = 1.0, floor_ = 0.0;
  double ell_p_ = 0, L_p_ = 0, r_p_ = 0, M_p_ = 0;
};

struct NoiseModel {
  enum class Kind { Bernoulli, GaussianAdditive, None };
  Kind kind = Kind::Bernoulli;
  double sigma = 0.0;  // GaussianAdditive only

  double K_sg() const {
    switch (kind) {
      case Kind::Bernoulli: return 0.5;
      case Kind::GaussianAdditive: return sigma;
      case Kind::None: return 0.0;
    }
    return 0.0;
  }
  static NoiseModel bernoulli() { return {Kind::Bernoulli, 0.0}; }
  static NoiseModel gaussian(double sigma) {
    return {Kind::GaussianAdditive, sigma};
  }
  static NoiseModel none() { return {Kind::None, 0.0}; }
};

std::string to_string(NoiseModel::Kind k);
NoiseModel::Kind noise_kind_from_string(const std::string& s);

// Symmetric edge-weight matrix with zero diagonal. Dense storage (uint8 for
// Bernoulli weights, double otherwise) up to a configured vertex cap;
// compressed pair storage above it. The pipeline's bulk kernels require
// dense storage.
class EdgeMatrix {
 public:
  enum class Storage { Empty, DenseU8, DenseF64, SparsePairs };

  void init(std::size_t n, Storage storage);
  std::size_t size() const { return n_; }
  Storage storage() const { return storage_; }

  double get(std::uint32_t i, std::uint32_t j) const;
  void set_sym(std::uint32_t i, std::uint32_t j, double v);

  const std::uint8_t* row_u8(std::uint32_t i) const {
    return u8_.data() + static_cast<std::size_t>(i) * n_;
  }
  const double* row_f64(std::uint32_t i) const {
    return f64_.data() + static_cast<std::size_t>(i) * n_;
  }

  bool operator==(const EdgeMatrix& other) const;

  // Serialization access.
  const std::vector<std::uint8_t>& raw_u8() const { return u8_; }
  const std::vector<double>& raw_f64() const { return f64_; }
  const std::unordered_map<std::uint64_t, double>& raw_sparse() const {
    return sparse_;
  }
  std::vector<std::uint8_t>& raw_u8() { return u8_; }
  std::vector<double>& raw_f64() { return f64_; }
  std::unordered_map<std::uint64_t, double>& raw_sparse() { return sparse_; }

 private:
  std::size_t n_ = 0;
  Storage storage_ = Storage::Empty;
  std::vector<std::uint8_t> u8_;
  std::vector<double> f64_;
  std::unordered_map<std::uint64_t, double> sparse_;
};

struct Seeds {
  std::uint64_t latent = 1;
  std::uint64_t edge = 2;
  std::uint64_t algo = 3;
};

// Partition of the vertex set into the five equal blocks V0,V1,V2,U1,U2.
struct Blocks {
  enum Id { V0 = 0, V1 = 1, V2 = 2, U1 = 3, U2 = 4 };
  std::array<std::vector<std::uint32_t>, 5> sets;

  std::span<const std::uint32_t> operator[](Id id) const { return sets[id]; }
  static Blocks contiguous(std::size_t n_block);
  static Blocks from_permutation(std::span<const std::uint32_t> perm,
                                 std::size_t n_block);
};

struct GenerateOptions {
  std::size_t dense_cap_u8 = 50000;  // largest N stored as dense uint8
  std::size_t dense_cap_f64 = 12000;
  std::size_t sparse_entry_cap = 80'000'000;  // memory guard
  bool points_only = false;  // skip edge materialization (oracle runs)
};

struct GraphSample {
  ManifoldSpec spec;
  LinkFunction link;
  NoiseModel noise;
  double q_n = 1.0;
  std::size_t n_block = 0;
  Seeds seeds;

  PointArray points;
  Blocks blocks;
  EdgeMatrix Z;

  std::size_t n_total() const { return 5 * n_block; }
  bool has_edges() const { return Z.storage() != EdgeMatrix::Storage::Empty; }
  PointRef point(std::uint32_t v) const { return points[v]; }
  double latent_distance(std::uint32_t u, std::uint32_t v) const {
    return geodesic_distance(spec, points[u], points[v]);
  }
  // Standing sparsity q_n * 5n >= (log 5n)^(log log 5n); violations warn.
  bool sparsity_assumption_holds() const;
};

GraphSample generate(const ManifoldSpec& spec, std::size_t n_per_block,
                     const LinkFunction& link, const NoiseModel& noise,
                     double q_n, const Seeds& seeds,
                     const GenerateOptions& options = {});

// Same edge law over caller-supplied latent positions (planted
// configurations); points.size() must equal 5*n_per_block.
GraphSample generate_from_points(const ManifoldSpec& spec, PointArray points,
                                 std::size_t n_per_block,
                                 const LinkFunction& link,
                                 const NoiseModel& noise, double q_n,
                                 const Seeds& seeds,
                                 const GenerateOptions& options = {});

// Re-draw the edges of an existing sample with a fresh edge seed, leaving
// points and blocks untouched.
void regenerate_edges(GraphSample& g, std::uint64_t edge_seed,
                      const GenerateOptions& options = {});

// Normalized average of v against U: (sum_{u in U} Z[u][v]) / (q_n |U|).
// Errors: empty U, or v in U.
double cn(const GraphSample& g, std::span<const std::uint32_t> U,
          std::uint32_t v);

// Conditional expectation (1/|U|) sum p(d(X_u, X_v)). Oracle only: consumes
// latent positions, never observable from the graph.
double acn(const GraphSample& g, std::span<const std::uint32_t> U,
           std::uint32_t v);

// Fluctuation error log(5n)/sqrt(q_n |U|).
double fe(const GraphSample& g, std::size_t U_size);

}  // namespace orderlab
