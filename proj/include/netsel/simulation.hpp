#pragma once

// Receding-horizon loop. Each cycle predicts the horizon, builds the network
// and per-feature information, selects features with the requested strategy,
// then steps the true team forward while folding realized relative and
// feature measurements into the stacked information state.

#include <netsel/estimator.hpp>
#include <netsel/matkit.hpp>
#include <netsel/motion.hpp>
#include <netsel/netgraph.hpp>
#include <netsel/rng.hpp>
#include <netsel/selection.hpp>
#include <netsel/vision.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace netsel {

struct Scenario {
  TeamDynamics dynamics;
  ReferencePlan plan;
  std::vector<CameraRig> rigs;
  std::vector<Feature> features;
  WeightLaw law;
  std::vector<Edge> topology;
  double relative_sigma = 1.0;  ///< relative-measurement noise scale; P_e = sigma^2 / omega_e I3
  double init_cov = 0.1;
  bool sample_noise = true;
  bool use_network = true;
  bool use_features = true;

  double eps = 0.5;
  double delta = 0.25;
  int q = 0;  ///< 0: min(sample_size(n, eps, delta), |Theta|)
  int k = 0;  ///< 0: distinct count the randomized sampler would pick
  Measure greedy_measure = Measure::Entropy;
  int cadence = 0;  ///< steps between re-selections; 0 means the horizon length

  int num_robots() const { return dynamics.num_robots; }
  int horizon() const { return plan.horizon; }
  int end_time() const { return plan.end_time; }
  int cycle_length() const { return cadence > 0 ? std::min(cadence, plan.horizon) : plan.horizon; }
  Index horizon_dim() const { return 3 * num_robots() * (horizon() + 1); }

  void validate() const {
    dynamics.validate();
    law.validate();
    if (plan.num_robots != dynamics.num_robots) throw Error("scenario: robot count mismatch");
    if (plan.horizon < 1) throw Error("scenario: horizon must be at least 1");
    if (plan.end_time < plan.horizon) throw Error("scenario: end time must be at least the horizon");
    if (rigs.size() != static_cast<std::size_t>(num_robots())) throw Error("scenario: one camera rig per robot");
    for (const auto& r : rigs) r.validate();
    CommGraph(num_robots(), topology, std::vector<double>(topology.size(), 1.0));
    if (!(relative_sigma > 0.0) || !(init_cov > 0.0)) throw Error("scenario: noise scales must be positive");
  }
};

struct StepRecord {
  int tau = 0;
  double theta = 0.0;    ///< |x_tau - mu_tau|
  double psi = 0.0;      ///< lambda_min ratio
  double psi_max = 0.0;  ///< lambda_max ratio
  int candidates = 0;    ///< |Theta| of the cycle that covers tau
  int selected = 0;      ///< |Phi| of that cycle
  double process_noise = 0.0;  ///< |delta_tau|, for common-random-number checks
};

struct CycleRecord {
  int t = 0;
  int candidates = 0;
  std::vector<int> chosen_ids;
  int draws = 0;
};

struct RunState {
  int t = 0;
  std::vector<CycleRecord> cycles;
  Vec truth;
  Vec mean;
  Mat cov;
  std::vector<StepRecord> records;
};

inline RunState initial_state(const Scenario& sc) {
  RunState s;
  s.truth = reference_team(sc.plan, 0.0);
  s.mean = s.truth;
  s.cov = sc.init_cov * Mat::Identity(sc.dynamics.state_dim(), sc.dynamics.state_dim());
  const auto ratio = covariance_ratio(s.cov, sc.dynamics.process_noise);
  s.records.push_back({0, 0.0, ratio.psi, ratio.psi_max, 0, 0, 0.0});
  return s;
}

/// Predicted poses[step][robot] along the horizon mean with the reference
/// camera attitude.
inline std::vector<std::vector<Pose>> horizon_poses(const Scenario& sc, const HorizonGaussian& hg, int t) {
  std::vector<std::vector<Pose>> poses(static_cast<std::size_t>(sc.horizon()) + 1);
  for (int k = 0; k <= sc.horizon(); ++k)
    for (int i = 0; i < sc.num_robots(); ++i)
      poses[k].push_back({hg.step_mean(k).segment<3>(3 * i),
                          euler_zyx(reference_trajectory(sc.plan, i + 1, t + k).euler)});
  return poses;
}

/// Communication graphs over the horizon, weighted from predicted positions
/// and scaled by the relative-measurement noise.
inline std::vector<CommGraph> horizon_graphs(const Scenario& sc, const HorizonGaussian& hg) {
  std::vector<CommGraph> graphs;
  const double scale = 1.0 / (sc.relative_sigma * sc.relative_sigma);
  for (int k = 0; k <= sc.horizon(); ++k) {
    std::vector<Vec3> pos;
    for (int i = 0; i < sc.num_robots(); ++i) pos.push_back(hg.step_mean(k).segment<3>(3 * i));
    auto topo = sc.use_network ? sc.topology : std::vector<Edge>{};
    auto g = build_graph(pos, sc.law, topo);
    auto w = g.weights();
    for (double& x : w) x *= scale;
    graphs.emplace_back(sc.num_robots(), g.edges(), std::move(w));
  }
  return graphs;
}

/// Everything decided at the start of a cycle.
struct CyclePlan {
  HorizonGaussian prior;
  Mat prior_info;
  std::vector<CommGraph> graphs;  ///< steps 0..M; step 0 is never measured
  Mat network_info;               ///< blkdiag over steps 1..M
  std::vector<FeatureInfo> candidates;
  CandidateSet set;
};

inline CyclePlan plan_cycle(const Scenario& sc, const Vec& mean, const Mat& cov, int t) {
  CyclePlan cp;
  cp.prior = predict_horizon(sc.dynamics, sc.plan, mean, cov, t);
  cp.prior_info = prior_info(cp.prior);
  cp.graphs = horizon_graphs(sc, cp.prior);
  std::vector<CommGraph> measured = cp.graphs;
  measured.front() = CommGraph(sc.num_robots(), {}, {});
  cp.network_info = horizon_network_info(measured, sc.horizon());
  cp.set.base = symmetrized(cp.prior_info + cp.network_info);
  if (sc.use_features) {
    const auto poses = horizon_poses(sc, cp.prior, t);
    for (const auto& f : sc.features) {
      auto fi = feature_info(f, poses, sc.rigs, sc.num_robots(), sc.horizon(), 1);
      if (!fi.triangulated) continue;
      cp.set.infos.push_back(fi.info);
      cp.set.ids.push_back(fi.id);
      cp.candidates.push_back(std::move(fi));
    }
  }
  return cp;
}

inline int sampling_budget(const Scenario& sc, const CandidateSet& cs) {
  if (sc.q > 0) return sc.q;
  const int q = sample_size(cs.dim(), sc.eps, sc.delta);
  return std::max(1, std::min<int>(q, static_cast<int>(cs.size())));
}

inline SelectionOutcome select_features(const Scenario& sc, const CandidateSet& cs, Strategy strategy,
                                        std::uint64_t seed) {
  if (cs.size() == 0) return finish_outcome(cs, {}, 0, strategy, seed);
  const int q = sampling_budget(sc, cs);
  switch (strategy) {
    case Strategy::Randomized: return sample_randomized(cs, q, seed);
    case Strategy::Uniform: return sample_uniform(cs, q, seed);
    case Strategy::Greedy: {
      int k = sc.k;
      if (k <= 0) k = static_cast<int>(draw_distinct(leverage_profile(cs).pmf, q, seed).size());
      return select_greedy(cs, std::min<int>(k, static_cast<int>(cs.size())), sc.greedy_measure);
    }
  }
  throw Error("unknown strategy");
}

/// Realized bearing measurement of one frame, z = G (x - y_f) + sigma eta,
/// with G the predicted row block. The known camera-offset term is removed
/// before fusion, so it is left out here.
inline Vec3 realize_frame(const FeatureFrame& fr, const Vec3& robot_position, const Vec3& landmark,
                          Rng& rng, bool sample_noise) {
  Vec3 z = fr.rows * (robot_position - landmark);
  if (sample_noise) z += fr.sigma * Vec3(standard_normal(rng, 3));
  return z;
}

/// Runs one cycle starting at state.t: selection, then up to cycle_length()
/// steps of truth propagation and measurement fusion. The posterior at each
/// step is the exact joint solve over the horizon with every measurement
/// realized so far.
inline void run_horizon_cycle(const Scenario& sc, RunState& state, Strategy strategy, std::uint64_t seed) {
  const int t = state.t;
  const int steps = std::min(sc.cycle_length(), sc.end_time() - t);
  if (steps <= 0) return;
  const Index d = sc.dynamics.state_dim();
  const Index n = sc.horizon_dim();

  const CyclePlan cp = plan_cycle(sc, state.mean, state.cov, t);
  const auto sel = select_features(sc, cp.set, strategy,
                                   derive_seed(seed, {static_cast<std::uint64_t>(Stream::Selection),
                                                      static_cast<std::uint64_t>(t)}));
  state.cycles.push_back({t, static_cast<int>(cp.set.size()), sel.chosen_ids, sel.draws});

  std::vector<const FeatureInfo*> chosen;
  std::vector<const Feature*> landmarks;
  for (int c : sel.chosen) {
    const auto* fi = &cp.candidates[static_cast<std::size_t>(c)];
    chosen.push_back(fi);
    const auto it = std::find_if(sc.features.begin(), sc.features.end(),
                                 [&](const Feature& f) { return f.id == fi->id; });
    landmarks.push_back(&*it);
  }
  std::vector<Vec> z(chosen.size());
  for (std::size_t j = 0; j < chosen.size(); ++j) z[j] = Vec::Zero(3 * chosen[j]->num_frames());

  const Mat ta = sc.dynamics.team_a(), tb = sc.dynamics.team_b();
  std::vector<Vec> controls;
  for (int k = 1; k <= sc.horizon(); ++k)
    controls.push_back(cp.prior.step_mean(k) - ta * cp.prior.step_mean(k - 1));
  Mat net_h = Mat::Zero(n, n);
  Vec net_b = Vec::Zero(n);
  Vec mu_prev = state.mean;
  Mat cov_prev = state.cov;

  for (int k = 1; k <= steps; ++k) {
    const int tau = t + k;
    const auto utau = static_cast<std::uint64_t>(tau);
    const Vec u = tracking_control(reference_team(sc.plan, tau), mu_prev);
    controls[static_cast<std::size_t>(k - 1)] = u;
    Rng proc = make_rng(seed, Stream::Process, {utau});
    const Vec delta = sc.sample_noise ? sample_process_noise(sc.dynamics, proc) : Vec::Zero(d);
    state.truth = ta * state.truth + tb * u + delta;
    const Index off = d * k;

    // Relative measurements xi_e = x_to - x_from + noise with covariance I / w.
    const auto& g = cp.graphs[static_cast<std::size_t>(k)];
    for (std::size_t e = 0; e < g.edges().size(); ++e) {
      const auto [i, j] = g.edges()[e];
      const double w = g.weights()[e];
      if (!(w > 0.0)) continue;
      Rng rel = make_rng(seed, Stream::Relative, {utau, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)});
      Vec3 xi = state.truth.segment<3>(3 * j) - state.truth.segment<3>(3 * i);
      if (sc.sample_noise) xi += Vec3(standard_normal(rel, 3)) / std::sqrt(w);
      net_b.segment<3>(off + 3 * i) -= w * xi;
      net_b.segment<3>(off + 3 * j) += w * xi;
      for (Index a = 0; a < 3; ++a) {
        net_h(off + 3 * i + a, off + 3 * i + a) += w;
        net_h(off + 3 * j + a, off + 3 * j + a) += w;
        net_h(off + 3 * i + a, off + 3 * j + a) -= w;
        net_h(off + 3 * j + a, off + 3 * i + a) -= w;
      }
    }

    Mat h = cp.prior_info + net_h;
    Vec b = cp.prior_info * propagate_mean(sc.dynamics, state.mean, controls) + net_b;
    for (std::size_t j = 0; j < chosen.size(); ++j) {
      const auto& fi = *chosen[j];
      std::vector<int> upto;
      for (int fr = 0; fr < fi.num_frames(); ++fr) {
        const auto& frame = fi.frames[static_cast<std::size_t>(fr)];
        if (frame.step > k) continue;
        if (frame.step == k) {
          Rng vis = make_rng(seed, Stream::Vision, {static_cast<std::uint64_t>(fi.id),
                                                    static_cast<std::uint64_t>(frame.robot), utau});
          z[j].segment<3>(3 * fr) =
              realize_frame(frame, state.truth.segment<3>(3 * frame.robot), landmarks[j]->position, vis,
                            sc.sample_noise) /
              frame.sigma;
        }
        upto.push_back(fr);
      }
      if (upto.empty()) continue;
      Vec zs(3 * static_cast<Index>(upto.size()));
      for (std::size_t r = 0; r < upto.size(); ++r) zs.segment<3>(3 * static_cast<Index>(r)) = z[j].segment<3>(3 * upto[r]);
      const auto contrib = marginal_contribution(fi, upto, zs);
      contrib.info.add_to(h);
      for (std::size_t a = 0; a < contrib.info.indices.size(); ++a)
        b(contrib.info.indices[a]) += contrib.vector(static_cast<Index>(a));
    }

    const Eigen::LLT<Mat> llt(symmetrized(h));
    if (llt.info() != Eigen::Success) throw Error("run_horizon_cycle: posterior information is singular");
    const Vec mu = llt.solve(b);
    Mat unit = Mat::Zero(n, d);
    unit.block(off, 0, d, d).setIdentity();
    mu_prev = mu.segment(off, d);
    cov_prev = symmetrized(llt.solve(unit).block(off, 0, d, d));

    const auto ratio = covariance_ratio(cov_prev, sc.dynamics.process_noise);
    state.records.push_back({tau, (state.truth - mu_prev).norm(), ratio.psi, ratio.psi_max,
                             static_cast<int>(cp.set.size()), static_cast<int>(sel.chosen.size()),
                             delta.norm()});
  }
  state.t = t + steps;
  state.mean = mu_prev;
  state.cov = cov_prev;
}

/// Full run from tau = 0 to the end time; records hold tau = 0..t_e.
inline RunState run_trial(const Scenario& sc, Strategy strategy, std::uint64_t seed) {
  sc.validate();
  RunState state = initial_state(sc);
  while (state.t < sc.end_time()) run_horizon_cycle(sc, state, strategy, seed);
  return state;
}

}  // namespace netsel
