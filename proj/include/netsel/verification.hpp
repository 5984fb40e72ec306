#pragma once

// Executable checks of the selection theory on random small instances:
// leverage normalization, the whitened-matrix identities, monotonicity of the
// performance measures and of leverage scores in the network Laplacian, the
// matrix Chernoff tail, and the hold frequency of the cone bound.

#include <netsel/experiments.hpp>
#include <netsel/matkit.hpp>
#include <netsel/netgraph.hpp>
#include <netsel/rng.hpp>
#include <netsel/selection.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace netsel {

namespace gen {

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
inline double uniform_real(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// PSD block of the given rank on a random subset of `support` indices out of n.
inline CompactInfo random_compact(Rng& rng, Index n, Index support, Index rank, double scale = 1.0) {
  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  std::shuffle(all.begin(), all.end(), rng);
  CompactInfo c;
  c.indices.assign(all.begin(), all.begin() + support);
  std::sort(c.indices.begin(), c.indices.end());
  c.block = scale * random_psd(rng, support, rank);
  return c;
}

/// Candidate set with dimension n and m features; each feature has rank up
/// to 3 on a random support. Base information is SPD.
inline CandidateSet candidate_set(Rng& rng, Index n, int m) {
  CandidateSet cs;
  cs.base = random_spd(rng, n, uniform_real(rng, 0.05, 1.0));
  for (int f = 0; f < m; ++f) {
    const Index support = uniform_int(rng, 1, static_cast<int>(n));
    const Index rank = uniform_int(rng, 0, static_cast<int>(std::min<Index>(support, 3)));
    cs.infos.push_back(random_compact(rng, n, support, rank, uniform_real(rng, 0.1, 5.0)));
    cs.ids.push_back(f);
  }
  return cs;
}

/// Random weighted graph on `nodes` nodes (each pair present with prob. 1/2).
inline CommGraph random_graph(Rng& rng, int nodes) {
  std::vector<Edge> edges;
  std::vector<double> w;
  for (int i = 0; i < nodes; ++i)
    for (int j = i + 1; j < nodes; ++j)
      if (uniform_real(rng, 0.0, 1.0) < 0.5) {
        edges.push_back({i, j});
        w.push_back(uniform_real(rng, 0.05, 2.0));
      }
  return CommGraph(nodes, std::move(edges), std::move(w));
}

/// Adds one edge (new or parallel to an existing one) with positive weight.
inline CommGraph strengthen(Rng& rng, const CommGraph& g) {
  const int i = uniform_int(rng, 0, g.num_nodes() - 2);
  const int j = uniform_int(rng, i + 1, g.num_nodes() - 1);
  auto edges = g.edges();
  auto w = g.weights();
  const double extra = uniform_real(rng, 0.05, 2.0);
  const auto it = std::find(edges.begin(), edges.end(), Edge{i, j});
  if (it != edges.end()) {
    w[static_cast<std::size_t>(it - edges.begin())] += extra;
  } else {
    edges.push_back({i, j});
    w.push_back(extra);
  }
  return CommGraph(g.num_nodes(), std::move(edges), std::move(w));
}

}  // namespace gen

struct BatteryResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;   ///< worst observed value of the checked quantity
  double threshold = 0.0;  ///< value it must not exceed (or reach, see detail)
  std::string detail;
};

struct VerificationOptions {
  std::uint64_t seed = 1;
  int instances = 1000;        ///< normalization and identity battery
  int monotonicity = 500;      ///< network monotonicity probe
  int leverage_branch = 200;   ///< per branch of the leverage monotonicity probe
  int tail_trials = 5000;
  std::vector<int> tail_q = {20, 50, 100};
  int hold_trials = 500;
  int hold_features = 40;
  Index small_n = 9;
  double eps = 0.5;
  double delta = 0.2;
  int chi_replicates = 64;
  bool corrupt_pmf = false;    ///< fault injection: scale the PMF so it no longer sums to 1
  int threads = 0;
};

/// Max |sum r - n| / n and |sum pi - 1| over random candidate sets, plus the
/// B~ identities on the same instances.
inline std::vector<BatteryResult> leverage_batteries(const VerificationOptions& o) {
  double worst_r = 0.0, worst_pi = 0.0, worst_sum = 0.0, worst_tr = 0.0;
  for (int t = 0; t < o.instances; ++t) {
    Rng rng = make_rng(o.seed, Stream::Battery, {1, static_cast<std::uint64_t>(t)});
    const Index n = gen::uniform_int(rng, 1, 15);
    const int m = gen::uniform_int(rng, 1, 30);
    const auto cs = gen::candidate_set(rng, n, m);
    const auto prof = leverage_profile(cs);
    Vec pmf = prof.pmf;
    if (o.corrupt_pmf) pmf *= 1.5;
    worst_r = std::max(worst_r, std::abs(prof.scores.sum() - static_cast<double>(n)) / static_cast<double>(n));
    worst_pi = std::max(worst_pi, std::abs(pmf.sum() - 1.0));
    const auto bt = b_tilde_matrices(cs);
    Mat sum = Mat::Zero(n, n);
    for (std::size_t f = 0; f < bt.size(); ++f) {
      sum += bt[f];
      const double r = prof.scores(static_cast<Index>(f));
      worst_tr = std::max(worst_tr, std::abs(bt[f].trace() - r) / std::max(r, 1e-300));
    }
    worst_sum = std::max(worst_sum, (sum - Mat::Identity(n, n)).norm() / static_cast<double>(n));
  }
  const std::string inst = std::to_string(o.instances) + " instances";
  return {
      {"leverage scores sum to n", worst_r <= 1e-8, worst_r, 1e-8, inst + ", relative error"},
      {"sampling PMF sums to 1", worst_pi <= 1e-10, worst_pi, 1e-10, inst + ", absolute error"},
      {"whitened matrices sum to identity", worst_sum <= 1e-8, worst_sum, 1e-8, inst + ", Frobenius error / n"},
      {"whitened trace equals leverage", worst_tr <= 1e-9, worst_tr, 1e-9, inst + ", relative error"},
  };
}

/// Fused information with a stronger network never has a larger measure.
/// Slack is relative, floored at 1 for the log-determinant which can be 0.
inline BatteryResult network_monotonicity_battery(const VerificationOptions& o) {
  int violations = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < o.monotonicity; ++t) {
    Rng rng = make_rng(o.seed, Stream::Battery, {2, static_cast<std::uint64_t>(t)});
    const int nodes = gen::uniform_int(rng, 2, 4);
    const int horizon = gen::uniform_int(rng, 0, 2);
    const Index n = 3 * nodes * (horizon + 1);
    std::vector<CommGraph> g, g2;
    for (int k = 0; k <= horizon; ++k) {
      g.push_back(gen::random_graph(rng, nodes));
      g2.push_back(gen::strengthen(rng, g.back()));
    }
    Mat h = random_spd(rng, n, gen::uniform_real(rng, 0.05, 1.0));
    const int feats = gen::uniform_int(rng, 0, 4);
    for (int f = 0; f < feats; ++f)
      gen::random_compact(rng, n, gen::uniform_int(rng, 1, static_cast<int>(n)), 2).add_to(h);
    const Mat a = h + horizon_network_info(g, horizon);
    const Mat b = h + horizon_network_info(g2, horizon);
    for (Measure m : {Measure::Variance, Measure::Entropy, Measure::Spectral}) {
      const double before = measure_value(a, m), after = measure_value(b, m);
      const double excess = (after - before) / std::max(std::abs(before), 1.0);
      worst = std::max(worst, excess);
      if (excess > 1e-9) ++violations;
    }
  }
  return {"measures non-increasing in the Laplacian", violations == 0, worst, 1e-9,
          std::to_string(o.monotonicity) + " instances x 3 measures, " + std::to_string(violations) + " violations"};
}

/// Leverage score of a designated feature when the Laplacian grows, on
/// instances built to satisfy either dominance condition:
///   decreasing: H^f = S / (m - 1) + P, S the sum of the other features
///   increasing: H^f = c S / (m - 1), c in [0, 1)
inline BatteryResult leverage_monotonicity_battery(const VerificationOptions& o, bool decreasing) {
  int violations = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < o.leverage_branch; ++t) {
    Rng rng = make_rng(o.seed, Stream::Battery, {decreasing ? 3u : 4u, static_cast<std::uint64_t>(t)});
    const int nodes = gen::uniform_int(rng, 2, 4);
    const Index n = 3 * nodes;
    const int m = gen::uniform_int(rng, 2, 8);
    const CommGraph g = gen::random_graph(rng, nodes);
    const CommGraph g2 = gen::strengthen(rng, g);
    const Mat prior = random_spd(rng, n, gen::uniform_real(rng, 0.05, 1.0));
    std::vector<Mat> others;
    Mat s = Mat::Zero(n, n);
    for (int f = 1; f < m; ++f) {
      others.push_back(random_psd(rng, n, gen::uniform_int(rng, 1, 3)));
      s += others.back();
    }
    Mat target = s / static_cast<double>(m - 1);
    if (decreasing)
      target += random_psd(rng, n, gen::uniform_int(rng, 0, 3));
    else
      target *= gen::uniform_real(rng, 0.0, 1.0);
    auto build = [&](const CommGraph& graph) {
      CandidateSet cs;
      cs.base = prior + kron(laplacian(graph), Mat::Identity(3, 3));
      cs.infos.push_back(CompactInfo::from_dense(target));
      cs.ids.push_back(0);
      for (int f = 1; f < m; ++f) {
        cs.infos.push_back(CompactInfo::from_dense(others[static_cast<std::size_t>(f - 1)]));
        cs.ids.push_back(f);
      }
      return leverage_profile(cs).scores(0);
    };
    const double r = build(g), r2 = build(g2);
    const double excess = (decreasing ? r2 - r : r - r2) / std::max(std::abs(r), 1e-300);
    worst = std::max(worst, excess);
    if (excess > 1e-9) ++violations;
  }
  return {decreasing ? "leverage non-increasing under feature dominance"
                     : "leverage non-decreasing under average dominance",
          violations == 0, worst, 1e-9,
          std::to_string(o.leverage_branch) + " instances, " + std::to_string(violations) + " violations"};
}

struct TailEstimate {
  int q = 0;
  double frequency = 0.0;
  double bound = 0.0;  ///< n exp(-q eps^2 / 2n); may exceed 1
  double slack = 0.0;  ///< 3 sigma of the Bernoulli estimate
};

/// Empirical P[lambda_min(sum of q i.i.d. normalized whitened matrices) <= (1-eps) q/n].
inline TailEstimate chernoff_tail(const CandidateSet& cs, int q, double eps, int trials, std::uint64_t seed) {
  const auto bt = b_tilde_matrices(cs);
  const auto prof = leverage_profile(cs);
  const Index n = cs.dim();
  std::vector<Mat> normalized;
  for (std::size_t f = 0; f < bt.size(); ++f) normalized.push_back(bt[f] / prof.scores(static_cast<Index>(f)));
  std::vector<double> w(prof.pmf.data(), prof.pmf.data() + prof.pmf.size());
  std::discrete_distribution<int> pick(w.begin(), w.end());
  Rng rng(seed);
  const double level = (1.0 - eps) * q / static_cast<double>(n);
  int hits = 0;
  for (int t = 0; t < trials; ++t) {
    Mat sum = Mat::Zero(n, n);
    for (int i = 0; i < q; ++i) sum += normalized[static_cast<std::size_t>(pick(rng))];
    if (lambda_min(sum) <= level) ++hits;
  }
  TailEstimate out;
  out.q = q;
  out.frequency = static_cast<double>(hits) / trials;
  out.bound = static_cast<double>(n) * std::exp(-q * eps * eps / (2.0 * static_cast<double>(n)));
  out.slack = 3.0 * std::sqrt(out.frequency * (1.0 - out.frequency) / trials);
  return out;
}

inline BatteryResult chernoff_tail_battery(const VerificationOptions& o) {
  Rng rng = make_rng(o.seed, Stream::Battery, {5});
  const auto cs = gen::candidate_set(rng, o.small_n, o.hold_features);
  bool ok = true;
  double worst = -std::numeric_limits<double>::infinity();
  std::string detail;
  for (std::size_t k = 0; k < o.tail_q.size(); ++k) {
    const auto est = chernoff_tail(cs, o.tail_q[k], o.eps, o.tail_trials,
                                   derive_seed(o.seed, {static_cast<std::uint64_t>(Stream::Battery), 6, k}));
    const double margin = est.frequency - (est.bound + est.slack);
    worst = std::max(worst, margin);
    ok = ok && margin <= 0.0;
    detail += "q=" + std::to_string(est.q) + ": freq " + fmt(est.frequency) + " bound " + fmt(est.bound) +
              (est.bound >= 1.0 ? " (vacuous)" : "") + "; ";
  }
  return {"matrix Chernoff tail", ok, worst, 0.0, detail + "measured = max(freq - bound - 3 sigma)"};
}

struct HoldFrequency {
  int trials = 0;
  int holds = 0;
  int holds_proof = 0;
  int q = 0;
  double required = 0.0;  ///< (3/4 - delta) - 3 sigma
};

inline HoldFrequency cone_bound_frequency(const VerificationOptions& o) {
  HoldFrequency out;
  out.trials = o.hold_trials;
  out.q = sample_size(o.small_n, o.eps, o.delta);
  std::vector<ConeBoundCheck> checks(static_cast<std::size_t>(o.hold_trials));
  parallel_for(o.hold_trials, o.threads, [&](int t) {
    Rng rng = make_rng(o.seed, Stream::Battery, {7, static_cast<std::uint64_t>(t)});
    const auto cs = gen::candidate_set(rng, o.small_n, o.hold_features);
    const auto sel = sample_randomized(cs, out.q, rng());
    checks[static_cast<std::size_t>(t)] = verify_cone_bound(cs, sel, o.eps, o.chi_replicates, rng());
  });
  for (const auto& c : checks) {
    out.holds += c.holds;
    out.holds_proof += c.holds_proof;
  }
  const double p = 0.75 - o.delta;
  out.required = p - 3.0 * std::sqrt(p * (1.0 - p) / o.hold_trials);
  return out;
}

inline BatteryResult cone_bound_battery(const VerificationOptions& o) {
  const auto h = cone_bound_frequency(o);
  const double freq = static_cast<double>(h.holds) / h.trials;
  return {"cone bound hold frequency", freq >= h.required, freq, h.required,
          std::to_string(h.trials) + " selections, q=" + std::to_string(h.q) + ", proof form held in " +
              std::to_string(h.holds_proof) + "; threshold is a lower bound"};
}

struct VerificationReport {
  std::vector<BatteryResult> results;

  bool all_passed() const {
    return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
  }

  std::string text() const {
    std::string s;
    for (const auto& r : results)
      s += std::string(r.passed ? "PASS" : "FAIL") + "  " + r.name + "  measured=" + fmt(r.measured) +
           " threshold=" + fmt(r.threshold) + "  " + r.detail + "\n";
    s += all_passed() ? "all batteries passed\n" : "some batteries FAILED\n";
    return s;
  }

  void write_csv(const std::filesystem::path& path) const {
    CsvTable t({"battery", "passed", "measured", "threshold", "detail"});
    for (const auto& r : results) {
      std::string d = r.detail;
      std::replace(d.begin(), d.end(), ',', ';');
      t.add({r.name, r.passed ? "1" : "0", fmt(r.measured), fmt(r.threshold), d});
    }
    t.write(path);
  }
};

inline VerificationReport run_verification(const VerificationOptions& o) {
  VerificationReport rep;
  rep.results = leverage_batteries(o);
  rep.results.push_back(network_monotonicity_battery(o));
  rep.results.push_back(leverage_monotonicity_battery(o, true));
  rep.results.push_back(leverage_monotonicity_battery(o, false));
  rep.results.push_back(chernoff_tail_battery(o));
  rep.results.push_back(cone_bound_battery(o));
  return rep;
}

}  // namespace netsel
