#pragma once

// Feature selection over a candidate set: leverage scores and their sampling
// distribution, leverage-weighted and uniform random sampling, greedy
// selection under a performance measure, the sample-size rule, and the
// whitened per-feature matrices used to check the multiplicative cone bound.

#include <netsel/compact.hpp>
#include <netsel/matkit.hpp>
#include <netsel/rng.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace netsel {

/// Base information H~ (prior + network) plus the candidate features' H^f.
struct CandidateSet {
  Mat base;
  std::vector<CompactInfo> infos;
  std::vector<int> ids;

  Index dim() const { return base.rows(); }
  std::size_t size() const { return infos.size(); }

  void validate() const {
    if (base.rows() != base.cols() || base.rows() == 0) throw Error("candidate set: bad base matrix");
    if (ids.size() != infos.size()) throw Error("candidate set: one id per feature required");
    for (const auto& c : infos)
      for (Index i : c.indices)
        if (i < 0 || i >= dim()) throw Error("candidate set: feature index out of range");
    Eigen::LLT<Mat> llt(symmetrized(base));
    if (llt.info() != Eigen::Success) throw Error("candidate set: base information is not PD");
  }

  /// H~^f = H~ / |Theta| + H^f as a dense matrix.
  Mat decomposed(std::size_t k) const {
    Mat out = base / static_cast<double>(size());
    infos[k].add_to(out);
    return out;
  }
};

/// H(Theta) = H~ + sum_f H^f.
inline Mat maximal_info(const CandidateSet& cs) {
  Mat h = cs.base;
  for (const auto& c : cs.infos) c.add_to(h);
  return symmetrized(h);
}

/// H~ plus the information of the chosen candidates (positions into cs).
inline Mat fused_info(const CandidateSet& cs, const std::vector<int>& chosen) {
  Mat h = cs.base;
  for (int k : chosen) cs.infos.at(static_cast<std::size_t>(k)).add_to(h);
  return symmetrized(h);
}

struct LeverageProfile {
  Vec scores;  ///< r_f = Tr(H(Theta)^{-1} H~^f)
  Vec pmf;     ///< pi_f = r_f / n
  Index n = 0;
};

inline LeverageProfile leverage_profile(const CandidateSet& cs) {
  if (cs.size() == 0) throw Error("leverage_profile: empty candidate set");
  const Mat h = maximal_info(cs);
  Eigen::LLT<Mat> llt(h);
  if (llt.info() != Eigen::Success) throw Error("leverage_profile: maximal information is singular");
  const Mat hinv = symmetrized(llt.solve(Mat::Identity(h.rows(), h.cols())));
  const double shared = (hinv.cwiseProduct(cs.base)).sum() / static_cast<double>(cs.size());
  LeverageProfile out;
  out.n = cs.dim();
  out.scores.resize(static_cast<Index>(cs.size()));
  for (std::size_t k = 0; k < cs.size(); ++k)
    out.scores(static_cast<Index>(k)) = shared + cs.infos[k].trace_with(hinv);
  out.pmf = out.scores / static_cast<double>(out.n);
  return out;
}

enum class Strategy { Randomized, Uniform, Greedy };

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::Randomized: return "randomized";
    case Strategy::Uniform: return "uniform";
    case Strategy::Greedy: return "greedy";
  }
  return "?";
}

inline Strategy parse_strategy(std::string_view s) {
  if (s == "randomized") return Strategy::Randomized;
  if (s == "uniform") return Strategy::Uniform;
  if (s == "greedy") return Strategy::Greedy;
  throw Error("unknown strategy: " + std::string(s));
}

struct SelectionOutcome {
  std::vector<int> chosen;      ///< positions into the candidate set, in selection order
  std::vector<int> chosen_ids;  ///< feature ids of `chosen`
  Mat fused;                    ///< H~ + sum over chosen of H^f
  int draws = 0;                ///< q for sampling, k for greedy
  Strategy strategy = Strategy::Randomized;
  std::uint64_t seed = 0;
};

/// q i.i.d. draws (with replacement) from `pmf`; returns distinct positions
/// in order of first appearance.
inline std::vector<int> draw_distinct(const Vec& pmf, int q, std::uint64_t seed) {
  if (q < 1) throw Error("sampling: q must be at least 1");
  std::vector<double> w(pmf.data(), pmf.data() + pmf.size());
  for (double& x : w) x = std::max(x, 0.0);
  std::discrete_distribution<int> dist(w.begin(), w.end());
  Rng rng(seed);
  std::vector<char> taken(w.size(), 0);
  std::vector<int> out;
  for (int k = 0; k < q; ++k) {
    const int f = dist(rng);
    if (!taken[static_cast<std::size_t>(f)]) {
      taken[static_cast<std::size_t>(f)] = 1;
      out.push_back(f);
    }
  }
  return out;
}

inline SelectionOutcome finish_outcome(const CandidateSet& cs, std::vector<int> chosen, int draws,
                                       Strategy s, std::uint64_t seed) {
  SelectionOutcome out;
  for (int k : chosen) out.chosen_ids.push_back(cs.ids.at(static_cast<std::size_t>(k)));
  out.fused = fused_info(cs, chosen);
  out.chosen = std::move(chosen);
  out.draws = draws;
  out.strategy = s;
  out.seed = seed;
  return out;
}

/// Leverage-weighted sampling with an already computed distribution.
inline SelectionOutcome sample_with_pmf(const CandidateSet& cs, const Vec& pmf, int q,
                                        std::uint64_t seed, Strategy tag = Strategy::Randomized) {
  if (cs.size() == 0) return finish_outcome(cs, {}, q, tag, seed);
  return finish_outcome(cs, draw_distinct(pmf, q, seed), q, tag, seed);
}

inline SelectionOutcome sample_randomized(const CandidateSet& cs, int q, std::uint64_t seed) {
  if (cs.size() == 0) return finish_outcome(cs, {}, q, Strategy::Randomized, seed);
  return sample_with_pmf(cs, leverage_profile(cs).pmf, q, seed, Strategy::Randomized);
}

inline SelectionOutcome sample_uniform(const CandidateSet& cs, int q, std::uint64_t seed) {
  const Vec pmf = Vec::Constant(static_cast<Index>(cs.size()), 1.0 / std::max<double>(1.0, cs.size()));
  return sample_with_pmf(cs, pmf, q, seed, Strategy::Uniform);
}

namespace detail {

/// Measure of (H + P^T K P) given H^{-1}, through the low-rank identities
///   log det(H + P^T K P) = log det H + log det(I + K S),
///   Tr((H + P^T K P)^{-1}) = Tr(H^{-1}) - Tr((I + K S)^{-1} K Y^T Y),
/// with S = P H^{-1} P^T and Y = H^{-1} P^T.
inline double measure_after(const Mat& hinv, double current, const CompactInfo& c, Measure m,
                            const Mat& h) {
  if (c.empty()) return current;
  if (m == Measure::Spectral) {
    Mat t = h;
    c.add_to(t);
    return spectral_functionals(t).min_eig_inv;
  }
  const Mat s = c.gather(hinv);
  const Mat core = Mat::Identity(s.rows(), s.cols()) + c.block * s;
  Eigen::PartialPivLU<Mat> lu(core);
  if (m == Measure::Entropy) {
    const Vec d = lu.matrixLU().diagonal();
    return current - d.array().abs().log().sum();
  }
  const Mat y = c.gather_cols(hinv);
  return current - (lu.solve(c.block) * (y.transpose() * y)).trace();
}

}  // namespace detail

/// k rounds, each adding the candidate that minimizes the measure of the
/// fused matrix. Candidates are scanned in ascending id order and a strict
/// improvement is required to displace the incumbent, so ties go to the
/// lowest id.
inline SelectionOutcome select_greedy(const CandidateSet& cs, int k, Measure measure) {
  if (k < 0 || static_cast<std::size_t>(k) > cs.size())
    throw Error("select_greedy: k must be between 0 and the number of candidates");
  std::vector<int> order(cs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return cs.ids[static_cast<std::size_t>(a)] < cs.ids[static_cast<std::size_t>(b)];
  });

  Mat h = symmetrized(cs.base);
  Mat hinv = spd_inverse(h);
  double current = measure_value(h, measure);
  std::vector<char> taken(cs.size(), 0);
  std::vector<int> chosen;
  for (int round = 0; round < k; ++round) {
    int best = -1;
    double best_value = std::numeric_limits<double>::infinity();
    for (int c : order) {
      if (taken[static_cast<std::size_t>(c)]) continue;
      const double v = detail::measure_after(hinv, current, cs.infos[static_cast<std::size_t>(c)], measure, h);
      if (best < 0 || v < best_value) {
        best = c;
        best_value = v;
      }
    }
    const auto& pick = cs.infos[static_cast<std::size_t>(best)];
    taken[static_cast<std::size_t>(best)] = 1;
    chosen.push_back(best);
    pick.add_to(h);
    current = best_value;
    if (!pick.empty()) {
      if ((round + 1) % 16 == 0) {
        hinv = spd_inverse(h);
        current = measure_value(h, measure);
      } else {
        const Mat s = pick.gather(hinv);
        const Mat y = pick.gather_cols(hinv);
        const Mat core = Mat::Identity(s.rows(), s.cols()) + pick.block * s;
        hinv = symmetrized(hinv - y * core.partialPivLu().solve(pick.block) * y.transpose());
      }
    }
  }
  return finish_outcome(cs, std::move(chosen), k, Strategy::Greedy, 0);
}

/// q = ceil(2 n ln(n / delta) / eps^2).
inline int sample_size(Index n, double eps, double delta) {
  if (n < 1) throw Error("sample_size: n must be positive");
  if (!(eps > 0.0 && eps < 1.0)) throw Error("sample_size: eps must lie in (0, 1)");
  if (!(delta > 0.0 && delta < 0.75)) throw Error("sample_size: delta must lie in (0, 3/4)");
  const double nn = static_cast<double>(n);
  const double q = std::ceil(2.0 * nn * std::log(nn / delta) / (eps * eps));
  if (q > static_cast<double>(std::numeric_limits<int>::max())) throw Error("sample_size: overflow");
  return static_cast<int>(q);
}

/// B~^f = H(Theta)^{-1/2} H~^f H(Theta)^{-1/2}; dense, intended for small n.
inline std::vector<Mat> b_tilde_matrices(const CandidateSet& cs) {
  const Mat r = inv_sqrt(maximal_info(cs));
  std::vector<Mat> out;
  out.reserve(cs.size());
  for (std::size_t k = 0; k < cs.size(); ++k) out.push_back(symmetrized(r * cs.decomposed(k) * r));
  return out;
}

/// zeta = inf{gamma : gamma * sum_{f in Phi} B~^f >= (q/n)(1-eps) I}.
inline double cone_zeta(const std::vector<Mat>& btilde, const std::vector<int>& chosen, int q,
                        double eps) {
  if (chosen.empty() || btilde.empty()) return std::numeric_limits<double>::infinity();
  Mat sum = Mat::Zero(btilde.front().rows(), btilde.front().cols());
  for (int k : chosen) sum += btilde.at(static_cast<std::size_t>(k));
  const double lmin = lambda_min(sum);
  if (!(lmin > 0.0)) return std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(sum.rows());
  return (q / n) * (1.0 - eps) / lmin;
}

struct ConeBoundCheck {
  double zeta = 0.0;
  double chi_hat = 0.0;
  bool holds = false;        ///< c H(Theta) <= H(Phi), fused as H~ + sum H^f
  bool holds_proof = false;  ///< c H(Theta) <= sum_{f in Phi} H~^f
};

/// Cone-bound check with a given chi estimate.
inline ConeBoundCheck check_cone_bound(const CandidateSet& cs, const std::vector<Mat>& btilde,
                                       const SelectionOutcome& outcome, double eps, double chi_hat) {
  ConeBoundCheck out;
  out.chi_hat = chi_hat;
  out.zeta = cone_zeta(btilde, outcome.chosen, outcome.draws, eps);
  if (outcome.chosen.empty() || !std::isfinite(chi_hat) || !(chi_hat > 0.0)) return out;
  const Mat target = (1.0 - eps) / (4.0 * chi_hat) * maximal_info(cs);
  out.holds = psd_leq(target, outcome.fused);
  Mat proof = Mat::Zero(cs.dim(), cs.dim());
  for (int k : outcome.chosen) proof += cs.decomposed(static_cast<std::size_t>(k));
  out.holds_proof = psd_leq(target, proof);
  return out;
}

/// chi_hat = mean(zeta) n / q over `replicates` independent leverage-sampled
/// selections of q draws.
inline double estimate_chi(const CandidateSet& cs, const std::vector<Mat>& btilde, const Vec& pmf,
                           int q, double eps, int replicates, std::uint64_t seed) {
  double acc = 0.0;
  for (int r = 0; r < replicates; ++r) {
    const auto chosen = draw_distinct(pmf, q, derive_seed(seed, {static_cast<std::uint64_t>(r)}));
    acc += cone_zeta(btilde, chosen, q, eps);
  }
  return acc / replicates * static_cast<double>(cs.dim()) / q;
}

inline ConeBoundCheck verify_cone_bound(const CandidateSet& cs, const SelectionOutcome& outcome,
                                        double eps, int replicates = 64, std::uint64_t seed = 0) {
  const auto btilde = b_tilde_matrices(cs);
  const auto prof = leverage_profile(cs);
  const int q = std::max(outcome.draws, 1);
  const double chi = estimate_chi(cs, btilde, prof.pmf, q, eps, replicates, seed);
  return check_cone_bound(cs, btilde, outcome, eps, chi);
}

}  // namespace netsel
