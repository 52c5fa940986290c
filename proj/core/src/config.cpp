#include "orderlab/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace orderlab {

namespace {

using nlohmann::json;

void require_keys(const json& j, const std::string& where,
                  const std::set<std::string>& allowed) {
  if (!j.is_object())
    throw std::invalid_argument("config: " + where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::invalid_argument("config: unknown key '" + it.key() +
                                  "' in " + where);
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

}  // namespace

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

LinkFunction ExperimentConfig::link() const {
  switch (link_family_) {
    case LinkFamily::ExpDecay:
      return LinkFunction::exp_decay(link_tau_, manifold.r_p,
                                     manifold.diameter());
    case LinkFamily::LinearClamp:
      return LinkFunction::linear_clamp(link_tau_, link_floor_, manifold.r_p,
                                        manifold.diameter());
    case LinkFamily::NegativeDistance:
      return LinkFunction::negative_distance(manifold.diameter());
  }
  throw std::logic_error("unreachable");
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  require_keys(j, "<root>",
               {"manifold", "link", "noise", "q_n", "n_per_block", "seeds",
                "mode", "cn_mode", "cluster", "pipeline", "unknown",
                "assemble", "evaluation", "output_dir"});
  ExperimentConfig cfg;

  {
    const json& m = j.at("manifold");
    require_keys(m, "manifold", {"kind", "dimension", "scale"});
    cfg.manifold.kind = manifold_kind_from_string(m.at("kind").get<std::string>());
    cfg.manifold.dimension = m.at("dimension").get<int>();
    cfg.manifold.scale = get_or(m, "scale", 1.0);
  }
  {
    const json& l = j.at("link");
    require_keys(l, "link", {"family", "tau", "floor", "r_p"});
    cfg.link_family_ = link_family_from_string(l.at("family").get<std::string>());
    cfg.link_tau_ = get_or(l, "tau", 1.0);
    cfg.link_floor_ = get_or(l, "floor", 0.0);
    cfg.manifold.r_p = cfg.link_family_ == LinkFamily::NegativeDistance
                           ? get_or(l, "r_p", cfg.manifold.diameter())
                           : l.at("r_p").get<double>();
  }
  cfg.manifold.validate();
  cfg.link().validate();

  if (j.contains("noise")) {
    const json& nz = j.at("noise");
    require_keys(nz, "noise", {"kind", "sigma"});
    cfg.noise.kind = noise_kind_from_string(nz.at("kind").get<std::string>());
    cfg.noise.sigma = get_or(nz, "sigma", 0.0);
  }
  cfg.q_n = get_or(j, "q_n", 1.0);
  if (!(cfg.q_n > 0.0) || cfg.q_n > 1.0)
    throw std::invalid_argument("config: q_n must lie in (0, 1]");
  cfg.n_per_block = j.at("n_per_block").get<std::size_t>();
  if (cfg.n_per_block < 1)
    throw std::invalid_argument("config: n_per_block must be >= 1");

  if (j.contains("seeds")) {
    const json& s = j.at("seeds");
    require_keys(s, "seeds", {"latent", "edge", "algo"});
    cfg.seeds.latent = get_or<std::uint64_t>(s, "latent", 1);
    cfg.seeds.edge = get_or<std::uint64_t>(s, "edge", 2);
    cfg.seeds.algo = get_or<std::uint64_t>(s, "algo", 3);
  }

  {
    std::string mode = get_or<std::string>(j, "mode", "known");
    if (mode == "known")
      cfg.mode = PipelineMode::KnownLink;
    else if (mode == "unknown")
      cfg.mode = PipelineMode::UnknownLink;
    else
      throw std::invalid_argument("config: mode must be known|unknown");
    std::string cnm = get_or<std::string>(j, "cn_mode", "observable");
    if (cnm == "observable")
      cfg.cn_mode = CnMode::Observable;
    else if (cnm == "latent_oracle")
      cfg.cn_mode = CnMode::LatentOracle;
    else
      throw std::invalid_argument("config: cn_mode must be observable|latent_oracle");
  }

  // Pipeline thresholds: paper-formula defaults, then explicit overrides.
  cfg.pipeline = PipelineParams::paper_defaults(cfg.manifold, cfg.link(),
                                                cfg.n_per_block, cfg.q_n);
  if (j.contains("pipeline")) {
    const json& p = j.at("pipeline");
    require_keys(p, "pipeline",
                 {"delta_n", "xi", "C_xi", "proxy2_max", "ring_lo", "ring_hi",
                  "meso_lo", "meso_hi", "tar_max", "screening_factor",
                  "anchor_s1", "candidate_tol", "range_tol", "C_proxy",
                  "C_stability", "C_ring_avg", "C_anchor_dist", "proxy_floor",
                  "slab_h", "slab_rho_minus", "slab_rho_plus", "r_G"});
    auto& pl = cfg.pipeline;
    // C_xi first: it feeds the xi formula unless xi itself is overridden.
    if (p.contains("C_xi")) {
      pl.C_xi = p.at("C_xi").get<double>();
      pl.xi = std::pow(1.0 / (cfg.q_n * static_cast<double>(cfg.n_per_block)),
                       1.0 / (cfg.manifold.dimension + 5)) *
              std::pow(std::log(5.0 * static_cast<double>(cfg.n_per_block)),
                       pl.C_xi);
    }
    pl.delta_n = get_or(p, "delta_n", pl.delta_n);
    pl.xi = get_or(p, "xi", pl.xi);
    pl.r_G = get_or(p, "r_G", pl.r_G);
    pl.proxy2_max = get_or(p, "proxy2_max", pl.proxy2_max);
    pl.ring_lo = get_or(p, "ring_lo", pl.ring_lo);
    pl.ring_hi = get_or(p, "ring_hi", pl.ring_hi);
    pl.meso_lo = get_or(p, "meso_lo", pl.meso_lo);
    pl.meso_hi = get_or(p, "meso_hi", pl.meso_hi);
    pl.tar_max = get_or(p, "tar_max", pl.tar_max);
    pl.screening_factor = get_or(p, "screening_factor", pl.screening_factor);
    pl.anchor_s1 = get_or(p, "anchor_s1", pl.anchor_s1);
    pl.candidate_tol = get_or(p, "candidate_tol", pl.candidate_tol);
    pl.range_tol = get_or(p, "range_tol", pl.range_tol);
    pl.C_proxy = get_or(p, "C_proxy", pl.C_proxy);
    pl.C_stability = get_or(p, "C_stability", pl.C_stability);
    pl.C_ring_avg = get_or(p, "C_ring_avg", pl.C_ring_avg);
    pl.C_anchor_dist = get_or(p, "C_anchor_dist", pl.C_anchor_dist);
    pl.proxy_floor = get_or(p, "proxy_floor", pl.proxy_floor);
    pl.slab_h = get_or(p, "slab_h", pl.slab_h);
    pl.slab_rho_minus = get_or(p, "slab_rho_minus", pl.slab_rho_minus);
    pl.slab_rho_plus = get_or(p, "slab_rho_plus", pl.slab_rho_plus);
  }

  cfg.unknown = UnknownLinkParams::paper_defaults(cfg.pipeline);
  if (j.contains("unknown")) {
    const json& u = j.at("unknown");
    require_keys(u, "unknown",
                 {"anchor_band_lo", "anchor_band_hi", "anchor_target",
                  "ref_lo", "ref_hi", "eps_net", "net_eligibility_max",
                  "N_dyadic", "invert_clamp_tol", "err_unknown"});
    auto& ul = cfg.unknown;
    ul.anchor_band_lo = get_or(u, "anchor_band_lo", ul.anchor_band_lo);
    ul.anchor_band_hi = get_or(u, "anchor_band_hi", ul.anchor_band_hi);
    ul.anchor_target = get_or(u, "anchor_target", ul.anchor_target);
    ul.ref_lo = get_or(u, "ref_lo", ul.ref_lo);
    ul.ref_hi = get_or(u, "ref_hi", ul.ref_hi);
    ul.eps_net = get_or(u, "eps_net", ul.eps_net);
    ul.net_eligibility_max =
        get_or(u, "net_eligibility_max", ul.net_eligibility_max);
    ul.N_dyadic = get_or(u, "N_dyadic", ul.N_dyadic);
    if (ul.N_dyadic < 1 || ul.N_dyadic > 20)
      throw std::invalid_argument("config: N_dyadic must lie in [1, 20]");
    ul.invert_clamp_tol = get_or(u, "invert_clamp_tol", ul.invert_clamp_tol);
    ul.err_unknown = get_or(u, "err_unknown", ul.err_unknown);
  }

  {
    cfg.cluster.r0 = 0.05 * cfg.manifold.r_G();
    if (j.contains("cluster")) {
      const json& c = j.at("cluster");
      require_keys(c, "cluster",
                   {"method", "r0", "r0_factor", "lambda0", "p0", "c_cn",
                    "threshold_multiplier", "z_margin"});
      if (c.contains("r0") && c.contains("r0_factor"))
        throw std::invalid_argument("config: give cluster r0 or r0_factor");
      cfg.cluster.method = cluster_method_from_string(
          get_or<std::string>(c, "method", "oracle"));
      cfg.cluster.c_cn = get_or(c, "c_cn", cfg.cluster.c_cn);
      if (c.contains("r0_factor"))
        cfg.cluster.r0 = c.at("r0_factor").get<double>() * cfg.manifold.r_G();
      else if (c.contains("r0"))
        cfg.cluster.r0 = c.at("r0").get<double>();
      else
        cfg.cluster.r0 = 0.05 * cfg.manifold.r_G();
      cfg.cluster.lambda0 = get_or(c, "lambda0", cfg.cluster.lambda0);
      cfg.cluster.p0 = get_or(c, "p0", cfg.cluster.p0);
      cfg.cluster.threshold_multiplier =
          get_or(c, "threshold_multiplier", cfg.cluster.threshold_multiplier);
      cfg.cluster.z_margin = get_or(c, "z_margin", cfg.cluster.z_margin);
    }
    cfg.cluster.validate(cfg.manifold);
  }

  if (j.contains("assemble")) {
    const json& a = j.at("assemble");
    require_keys(a, "assemble",
                 {"lambda", "use_cover", "evaluation_mode", "epsilon_override",
                  "coverage_abort"});
    cfg.lambda = get_or(a, "lambda", cfg.lambda);
    cfg.use_cover = get_or(a, "use_cover", cfg.use_cover);
    cfg.evaluation_mode = get_or(a, "evaluation_mode", cfg.evaluation_mode);
    if (a.contains("epsilon_override") && !a.at("epsilon_override").is_null())
      cfg.epsilon_override = a.at("epsilon_override").get<double>();
    cfg.coverage_abort = get_or(a, "coverage_abort", cfg.coverage_abort);
  }

  if (j.contains("evaluation")) {
    const json& e = j.at("evaluation");
    require_keys(e, "evaluation", {"gw_order", "probes", "max_pairs"});
    cfg.eval.gw_order = get_or(e, "gw_order", cfg.eval.gw_order);
    cfg.eval.probes = get_or(e, "probes", cfg.eval.probes);
    cfg.eval.max_pairs = get_or(e, "max_pairs", cfg.eval.max_pairs);
  }
  cfg.output_dir = get_or<std::string>(j, "output_dir", "");
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config: parse error in " + path + ": " +
                                e.what());
  }
  return from_json(j);
}

nlohmann::json ExperimentConfig::resolved_json() const {
  json j;
  j["manifold"] = {{"kind", to_string(manifold.kind)},
                   {"dimension", manifold.dimension},
                   {"scale", manifold.scale}};
  j["link"] = {{"family", to_string(link_family_)},
               {"tau", link_tau_},
               {"floor", link_floor_},
               {"r_p", manifold.r_p}};
  j["noise"] = {{"kind", to_string(noise.kind)}, {"sigma", noise.sigma}};
  j["q_n"] = q_n;
  j["n_per_block"] = n_per_block;
  j["seeds"] = {{"latent", seeds.latent}, {"edge", seeds.edge},
                {"algo", seeds.algo}};
  j["mode"] = mode == PipelineMode::KnownLink ? "known" : "unknown";
  j["cn_mode"] = cn_mode == CnMode::Observable ? "observable" : "latent_oracle";
  j["cluster"] = {{"method", to_string(cluster.method)},
                  {"r0", cluster.r0},
                  {"lambda0", cluster.lambda0},
                  {"p0", cluster.p0},
                  {"c_cn", cluster.c_cn},
                  {"threshold_multiplier", cluster.threshold_multiplier},
                  {"z_margin", cluster.z_margin}};
  j["pipeline"] = {{"delta_n", pipeline.delta_n},
                   {"xi", pipeline.xi},
                   {"C_xi", pipeline.C_xi},
                   {"r_G", pipeline.r_G},
                   {"proxy2_max", pipeline.proxy2_max},
                   {"ring_lo", pipeline.ring_lo},
                   {"ring_hi", pipeline.ring_hi},
                   {"meso_lo", pipeline.meso_lo},
                   {"meso_hi", pipeline.meso_hi},
                   {"tar_max", pipeline.tar_max},
                   {"screening_factor", pipeline.screening_factor},
                   {"anchor_s1", pipeline.anchor_s1},
                   {"candidate_tol", pipeline.candidate_tol},
                   {"range_tol", pipeline.range_tol},
                   {"C_proxy", pipeline.C_proxy},
                   {"C_stability", pipeline.C_stability},
                   {"C_ring_avg", pipeline.C_ring_avg},
                   {"C_anchor_dist", pipeline.C_anchor_dist},
                   {"proxy_floor", pipeline.proxy_floor},
                   {"slab_h", pipeline.slab_h},
                   {"slab_rho_minus", pipeline.slab_rho_minus},
                   {"slab_rho_plus", pipeline.slab_rho_plus}};
  j["unknown"] = {{"anchor_band_lo", unknown.anchor_band_lo},
                  {"anchor_band_hi", unknown.anchor_band_hi},
                  {"anchor_target", unknown.anchor_target},
                  {"ref_lo", unknown.ref_lo},
                  {"ref_hi", unknown.ref_hi},
                  {"eps_net", unknown.eps_net},
                  {"net_eligibility_max", unknown.net_eligibility_max},
                  {"N_dyadic", unknown.N_dyadic},
                  {"invert_clamp_tol", unknown.invert_clamp_tol},
                  {"err_unknown", unknown.err_unknown}};
  j["assemble"] = {{"lambda", lambda},
                   {"use_cover", use_cover},
                   {"evaluation_mode", evaluation_mode},
                   {"epsilon_override", epsilon_override
                                            ? json(*epsilon_override)
                                            : json(nullptr)},
                   {"coverage_abort", coverage_abort}};
  j["evaluation"] = {{"gw_order", eval.gw_order},
                     {"probes", eval.probes},
                     {"max_pairs", eval.max_pairs}};
  j["output_dir"] = output_dir;
  return j;
}

std::string ExperimentConfig::config_hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(resolved_json().dump())));
  return std::string(buf);
}

AssembleOptions ExperimentConfig::assemble_options() const {
  AssembleOptions o;
  o.mode = mode;
  o.cn_mode = cn_mode;
  o.cluster = cluster;
  o.pipeline = pipeline;
  o.unknown = unknown;
  o.lambda = lambda;
  o.use_cover = use_cover;
  o.epsilon_override = epsilon_override;
  o.evaluation_mode = evaluation_mode;
  o.coverage_abort = coverage_abort;
  return o;
}

}  // namespace orderlab
