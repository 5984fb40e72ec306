#pragma once

// JSON scenario files. Keys are checked strictly so a misspelled field is an
// error rather than a silently ignored setting.

#include <netsel/simulation.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace netsel {

struct FeatureFieldConfig {
  int count = 800;
  std::optional<Box> box;  ///< default: enclosing box of all reference lanes plus margin
  double margin = 20.0;
  std::string csv;         ///< when set, features are read from this file instead
};

struct ScenarioConfig {
  int N = 10;
  int M = 20;
  int t_e = 200;
  double process_noise = 0.01;  ///< Lambda = process_noise * I3
  double pixel_sigma = 0.05;
  double relative_sigma = 1.0;
  double alpha = 1.0;
  double beta = 0.0;
  std::string topology = "complete";
  std::vector<Edge> edges;  ///< explicit topology when `topology` is "edges"
  FeatureFieldConfig features;
  Strategy strategy = Strategy::Randomized;
  int q = 0;
  int k = 0;
  std::uint64_t seed = 1;
  int replicates = 1;
  double fov_half_angle_deg = 60.0;
  double max_range = 40.0;
  double eps = 0.5;
  double delta = 0.25;
  double init_cov = 0.1;
  bool sample_noise = true;
  Measure greedy_measure = Measure::Entropy;
  int cadence = 0;
  int chi_replicates = 64;
  double lane_scale = 1e4;  ///< spacing of the reference lanes

  void validate() const {
    if (N < 1) throw Error("config: N must be at least 1");
    if (M < 1) throw Error("config: M must be at least 1");
    if (t_e < M) throw Error("config: t_e must be at least M");
    if (!(process_noise > 0.0) || !(pixel_sigma > 0.0) || !(relative_sigma > 0.0) || !(init_cov > 0.0))
      throw Error("config: noise scales must be positive");
    if (!(alpha > 0.0) || !(beta >= 0.0)) throw Error("config: need alpha > 0 and beta >= 0");
    if (features.count < 0 || !(features.margin >= 0.0)) throw Error("config: bad feature field");
    if (q < 0 || k < 0 || cadence < 0) throw Error("config: q, k and cadence must be nonnegative");
    if (replicates < 1 || chi_replicates < 1) throw Error("config: replicate counts must be positive");
    if (!(fov_half_angle_deg > 0.0 && fov_half_angle_deg < 180.0) || !(max_range > 0.0))
      throw Error("config: bad field of view");
    if (!(lane_scale > 0.0)) throw Error("config: lane_scale must be positive");
    if (!(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 0.75))
      throw Error("config: need 0 < eps < 1 and 0 < delta < 3/4");
  }
};

inline std::vector<Edge> topology_edges(const ScenarioConfig& c) {
  if (c.topology == "complete") return complete_topology(c.N);
  if (c.topology == "ring") return ring_topology(c.N);
  if (c.topology == "path") return path_topology(c.N);
  if (c.topology == "none") return {};
  if (c.topology == "edges") return c.edges;
  throw Error("config: unknown topology '" + c.topology + "'");
}

/// Box around every reference lane over [0, t_e + M], grown by `margin`.
inline Box lane_box(const ReferencePlan& plan, double margin) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (int tau = 0; tau <= plan.end_time + plan.horizon; ++tau)
    for (int i = 1; i <= plan.num_robots; ++i) {
      const Vec3 p = reference_trajectory(plan, i, tau).position;
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  lo.array() -= margin;
  hi.array() += margin;
  return {lo, hi};
}

/// Builds the simulation scenario. Relative CSV paths resolve against `base_dir`.
inline Scenario make_scenario(const ScenarioConfig& c, const std::filesystem::path& base_dir = {}) {
  c.validate();
  Scenario sc;
  sc.dynamics.num_robots = c.N;
  sc.dynamics.process_noise = c.process_noise * Mat3::Identity();
  sc.plan = {c.N, c.M, c.t_e, c.lane_scale};
  CameraRig rig;
  rig.pixel_sigma = c.pixel_sigma;
  rig.fov_half_angle = c.fov_half_angle_deg * std::numbers::pi / 180.0;
  rig.max_range = c.max_range;
  sc.rigs.assign(static_cast<std::size_t>(c.N), rig);
  sc.law = {c.alpha, c.beta};
  sc.topology = topology_edges(c);
  sc.relative_sigma = c.relative_sigma;
  sc.init_cov = c.init_cov;
  sc.sample_noise = c.sample_noise;
  sc.eps = c.eps;
  sc.delta = c.delta;
  sc.q = c.q;
  sc.k = c.k;
  sc.greedy_measure = c.greedy_measure;
  sc.cadence = c.cadence;
  if (!c.features.csv.empty()) {
    std::filesystem::path p = c.features.csv;
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    sc.features = load_features_csv(p);
  } else {
    const Box box = c.features.box ? *c.features.box : lane_box(sc.plan, c.features.margin);
    sc.features = generate_features(box, c.features.count,
                                    derive_seed(c.seed, {static_cast<std::uint64_t>(Stream::Features)}));
  }
  sc.validate();
  return sc;
}

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw Error("config: " + where + " must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw Error("config: unknown key '" + key + "' in " + where);
}

inline Vec3 read_vec3(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw Error("config: " + what + " must be an array of 3 numbers");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace detail

inline ScenarioConfig parse_config(const nlohmann::json& j) {
  detail::check_keys(j,
                     {"N", "M", "t_e", "process_noise", "pixel_sigma", "relative_sigma", "alpha", "beta",
                      "topology", "features", "strategy", "q", "k", "seed", "replicates",
                      "fov_half_angle_deg", "max_range", "eps", "delta", "init_cov", "sample_noise",
                      "greedy_measure", "cadence", "chi_replicates", "lane_scale"},
                     "scenario");
  ScenarioConfig c;
  try {
    auto get = [&](const char* key, auto& out) {
      if (j.contains(key)) out = j.at(key).get<std::decay_t<decltype(out)>>();
    };
    get("N", c.N);
    get("M", c.M);
    get("t_e", c.t_e);
    get("process_noise", c.process_noise);
    get("pixel_sigma", c.pixel_sigma);
    get("relative_sigma", c.relative_sigma);
    get("alpha", c.alpha);
    get("beta", c.beta);
    get("q", c.q);
    get("k", c.k);
    get("seed", c.seed);
    get("replicates", c.replicates);
    get("fov_half_angle_deg", c.fov_half_angle_deg);
    get("max_range", c.max_range);
    get("eps", c.eps);
    get("delta", c.delta);
    get("init_cov", c.init_cov);
    get("sample_noise", c.sample_noise);
    get("cadence", c.cadence);
    get("chi_replicates", c.chi_replicates);
    get("lane_scale", c.lane_scale);
    if (j.contains("strategy")) c.strategy = parse_strategy(j.at("strategy").get<std::string>());
    if (j.contains("greedy_measure")) c.greedy_measure = parse_measure(j.at("greedy_measure").get<std::string>());
    if (j.contains("topology")) {
      const auto& t = j.at("topology");
      if (t.is_string()) {
        c.topology = t.get<std::string>();
      } else if (t.is_array()) {
        c.topology = "edges";
        for (const auto& e : t) {
          if (!e.is_array() || e.size() != 2) throw Error("config: topology edges must be [i, j] pairs");
          c.edges.push_back({e[0].get<int>(), e[1].get<int>()});
        }
      } else {
        throw Error("config: topology must be a name or a list of edges");
      }
    }
    if (j.contains("features")) {
      const auto& f = j.at("features");
      detail::check_keys(f, {"count", "box", "margin", "csv"}, "features");
      if (f.contains("count")) c.features.count = f.at("count").get<int>();
      if (f.contains("margin")) c.features.margin = f.at("margin").get<double>();
      if (f.contains("csv")) c.features.csv = f.at("csv").get<std::string>();
      if (f.contains("box")) {
        const auto& b = f.at("box");
        detail::check_keys(b, {"lo", "hi"}, "features.box");
        c.features.box = Box{detail::read_vec3(b.at("lo"), "box.lo"), detail::read_vec3(b.at("hi"), "box.hi")};
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  try {
    return parse_config(j);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

inline nlohmann::json to_json(const ScenarioConfig& c) {
  nlohmann::json j;
  j["N"] = c.N;
  j["M"] = c.M;
  j["t_e"] = c.t_e;
  j["process_noise"] = c.process_noise;
  j["pixel_sigma"] = c.pixel_sigma;
  j["relative_sigma"] = c.relative_sigma;
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  if (c.topology == "edges") {
    j["topology"] = nlohmann::json::array();
    for (const auto& e : c.edges) j["topology"].push_back({e.from, e.to});
  } else {
    j["topology"] = c.topology;
  }
  nlohmann::json f;
  f["count"] = c.features.count;
  f["margin"] = c.features.margin;
  if (!c.features.csv.empty()) f["csv"] = c.features.csv;
  if (c.features.box) {
    const auto& b = *c.features.box;
    f["box"] = {{"lo", {b.lo.x(), b.lo.y(), b.lo.z()}}, {"hi", {b.hi.x(), b.hi.y(), b.hi.z()}}};
  }
  j["features"] = f;
  j["strategy"] = std::string(to_string(c.strategy));
  j["q"] = c.q;
  j["k"] = c.k;
  j["seed"] = c.seed;
  j["replicates"] = c.replicates;
  j["fov_half_angle_deg"] = c.fov_half_angle_deg;
  j["max_range"] = c.max_range;
  j["eps"] = c.eps;
  j["delta"] = c.delta;
  j["init_cov"] = c.init_cov;
  j["sample_noise"] = c.sample_noise;
  j["greedy_measure"] = std::string(to_string(c.greedy_measure));
  j["cadence"] = c.cadence;
  j["chi_replicates"] = c.chi_replicates;
  j["lane_scale"] = c.lane_scale;
  return j;
}

}  // namespace netsel
