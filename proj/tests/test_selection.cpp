#include <netsel/selection.hpp>

#include "support.hpp"

#include <algorithm>
#include <numeric>
#include <set>

using namespace netsel;
using netsel::test::rng_for;

namespace {

CompactInfo dense_info(const Mat& m) { return CompactInfo::from_dense(m); }

// Candidate set with full-support features of rank 1..3.
CandidateSet make_set(Rng& rng, Index n, int m) {
  CandidateSet cs;
  cs.base = random_spd(rng, n, 0.2);
  for (int f = 0; f < m; ++f) {
    cs.infos.push_back(dense_info(random_psd(rng, n, 1 + f % 3)));
    cs.ids.push_back(f);
  }
  return cs;
}

CandidateSet scalar_set(double base, std::vector<double> infos) {
  CandidateSet cs;
  cs.base = Mat::Constant(1, 1, base);
  for (std::size_t k = 0; k < infos.size(); ++k) {
    cs.infos.push_back(dense_info(Mat::Constant(1, 1, infos[k])));
    cs.ids.push_back(static_cast<int>(k));
  }
  return cs;
}

// Exhaustive greedy: each round evaluates every remaining candidate on the
// dense fused matrix.
std::vector<int> greedy_oracle(const CandidateSet& cs, int k, Measure m) {
  std::vector<int> chosen;
  Mat h = cs.base;
  for (int round = 0; round < k; ++round) {
    int best = -1;
    double bv = 0.0;
    for (std::size_t c = 0; c < cs.size(); ++c) {
      if (std::find(chosen.begin(), chosen.end(), static_cast<int>(c)) != chosen.end()) continue;
      const double v = measure_value(h + cs.infos[c].dense(cs.dim()), m);
      if (best < 0 || v < bv) best = static_cast<int>(c), bv = v;
    }
    chosen.push_back(best);
    h += cs.infos[static_cast<std::size_t>(best)].dense(cs.dim());
  }
  return chosen;
}

}  // namespace

TEST(MaximalInfo, Examples) {
  const auto cs = scalar_set(1.0, {2.0, 3.0});
  EXPECT_EQ(maximal_info(cs)(0, 0), 6.0);
  EXPECT_EQ(fused_info(cs, {1})(0, 0), 4.0);
  EXPECT_EQ(fused_info(cs, {})(0, 0), 1.0);
  CandidateSet bad = cs;
  bad.ids.pop_back();
  EXPECT_THROW(bad.validate(), Error);
  bad = cs;
  bad.infos[0].indices = {3};
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Leverage, ScalarExample) {
  const auto p = leverage_profile(scalar_set(1.0, {1.0, 2.0}));
  EXPECT_NEAR(p.scores(0), 0.375, 1e-15);
  EXPECT_NEAR(p.scores(1), 0.625, 1e-15);
  EXPECT_EQ(p.n, 1);
  const auto one = leverage_profile(scalar_set(3.0, {5.0}));
  EXPECT_NEAR(one.scores(0), 1.0, 1e-15);
  EXPECT_NEAR(one.pmf(0), 1.0, 1e-15);
  EXPECT_THROW(leverage_profile(scalar_set(1.0, {})), Error);
}

TEST(Leverage, MatchesDenseTraceOracle) {
  auto rng = rng_for(40);
  for (int t = 0; t < 200; ++t) {
    const Index n = 1 + t % 8;
    const auto cs = make_set(rng, n, 1 + t % 12);
    const auto p = leverage_profile(cs);
    const Mat hinv = maximal_info(cs).inverse();
    for (std::size_t k = 0; k < cs.size(); ++k)
      EXPECT_NEAR(p.scores(static_cast<Index>(k)), (hinv * cs.decomposed(k)).trace(), 1e-9 * n);
    EXPECT_NEAR(p.scores.sum(), static_cast<double>(n), 1e-9 * n);
    EXPECT_NEAR(p.pmf.sum(), 1.0, 1e-9);
    EXPECT_GT(p.pmf.minCoeff(), 0.0);
  }
}

TEST(Leverage, InvariantToCommonScaling) {
  auto rng = rng_for(41);
  for (int t = 0; t < 50; ++t) {
    auto cs = make_set(rng, 5, 6);
    const Vec a = leverage_profile(cs).scores;
    const double c = std::exp(std::uniform_real_distribution<double>(-5, 5)(rng));
    cs.base *= c;
    for (auto& i : cs.infos) i.block *= c;
    EXPECT_LE((leverage_profile(cs).scores - a).norm(), 1e-9 * a.norm());
  }
}

TEST(Leverage, DominantFeatureHasLargestScore) {
  auto rng = rng_for(42);
  auto cs = make_set(rng, 4, 6);
  cs.infos[3] = dense_info(1e4 * Mat::Identity(4, 4));
  const Vec s = leverage_profile(cs).scores;
  Index arg;
  s.maxCoeff(&arg);
  EXPECT_EQ(arg, 3);
  EXPECT_EQ(select_greedy(cs, 1, Measure::Variance).chosen, std::vector<int>{3});
}

TEST(BTilde, SumsToIdentityAndTracesAreScores) {
  auto rng = rng_for(43);
  for (int t = 0; t < 100; ++t) {
    const Index n = 1 + t % 7;
    const auto cs = make_set(rng, n, 1 + t % 9);
    const auto bt = b_tilde_matrices(cs);
    const auto p = leverage_profile(cs);
    Mat sum = Mat::Zero(n, n);
    for (std::size_t k = 0; k < bt.size(); ++k) {
      sum += bt[k];
      EXPECT_NEAR(bt[k].trace(), p.scores(static_cast<Index>(k)), 1e-8 * n);
      EXPECT_TRUE(is_psd(bt[k]));
    }
    EXPECT_LE((sum - Mat::Identity(n, n)).norm(), 1e-8 * n);
  }
}

TEST(DrawDistinct, FirstAppearanceAndValidation) {
  Vec pmf(4);
  pmf << 0.0, 0.5, 0.0, 0.5;
  const auto d = draw_distinct(pmf, 200, 7);
  std::set<int> s(d.begin(), d.end());
  EXPECT_EQ(s, (std::set<int>{1, 3}));
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(draw_distinct(pmf, 200, 7), d);
  EXPECT_THROW(draw_distinct(pmf, 0, 7), Error);
  EXPECT_LE(draw_distinct(pmf, 1, 7).size(), 1u);
}

TEST(DrawDistinct, SingleDrawFrequenciesFollowPmf) {
  Vec pmf(4);
  pmf << 0.1, 0.2, 0.3, 0.4;
  const int trials = 100000;
  std::vector<int> counts(4, 0);
  for (int k = 0; k < trials; ++k) ++counts[static_cast<std::size_t>(draw_distinct(pmf, 1, derive_seed(99, {static_cast<std::uint64_t>(k)}))[0])];
  for (int i = 0; i < 4; ++i) {
    const double p = pmf(i), sd = std::sqrt(trials * p * (1 - p));
    EXPECT_NEAR(counts[static_cast<std::size_t>(i)], trials * p, 4 * sd) << "cell " << i;
  }
}

TEST(Sampling, RandomizedUsesLeveragePmf) {
  const auto cs = scalar_set(1.0, {1.0, 2.0});
  const int trials = 100000;
  int first = 0;
  for (int k = 0; k < trials; ++k) {
    const auto o = sample_randomized(cs, 1, derive_seed(5, {static_cast<std::uint64_t>(k)}));
    ASSERT_EQ(o.chosen.size(), 1u);
    first += o.chosen[0] == 0;
  }
  EXPECT_NEAR(first, 0.375 * trials, 4 * std::sqrt(trials * 0.375 * 0.625));
}

TEST(Sampling, UniformFrequencies) {
  auto rng = rng_for(44);
  const auto cs = make_set(rng, 3, 5);
  const int trials = 50000;
  std::vector<int> counts(5, 0);
  for (int k = 0; k < trials; ++k) ++counts[static_cast<std::size_t>(sample_uniform(cs, 1, static_cast<std::uint64_t>(k) * 7919 + 1).chosen[0])];
  for (int c : counts) EXPECT_NEAR(c, trials / 5.0, 4 * std::sqrt(trials * 0.2 * 0.8));
}

TEST(Sampling, OutcomeBookkeeping) {
  auto rng = rng_for(45);
  auto cs = make_set(rng, 4, 6);
  for (std::size_t k = 0; k < cs.size(); ++k) cs.ids[k] = 100 + static_cast<int>(k);
  const auto o = sample_randomized(cs, 10, 3);
  EXPECT_EQ(o.draws, 10);
  EXPECT_EQ(o.strategy, Strategy::Randomized);
  ASSERT_EQ(o.chosen.size(), o.chosen_ids.size());
  for (std::size_t k = 0; k < o.chosen.size(); ++k) EXPECT_EQ(o.chosen_ids[k], 100 + o.chosen[k]);
  EXPECT_MAT_NEAR(o.fused, fused_info(cs, o.chosen), 1e-15);
  EXPECT_TRUE(psd_leq(cs.base, o.fused));
  EXPECT_TRUE(psd_leq(o.fused, maximal_info(cs)));
  CandidateSet empty;
  empty.base = Mat::Identity(2, 2);
  EXPECT_TRUE(sample_randomized(empty, 5, 1).chosen.empty());
  EXPECT_TRUE(sample_uniform(empty, 5, 1).chosen.empty());
}

TEST(Greedy, MatchesExhaustiveOracle) {
  auto rng = rng_for(46);
  for (Measure m : {Measure::Variance, Measure::Entropy, Measure::Spectral}) {
    for (int t = 0; t < 30; ++t) {
      const auto cs = make_set(rng, 2 + t % 5, 8);
      const int k = 1 + t % 8;
      EXPECT_EQ(select_greedy(cs, k, m).chosen, greedy_oracle(cs, k, m)) << to_string(m) << " trial " << t;
    }
  }
}

TEST(Greedy, LongRunsSurviveIncrementalUpdates) {
  auto rng = rng_for(47);
  const auto cs = make_set(rng, 6, 40);
  for (Measure m : {Measure::Variance, Measure::Entropy}) {
    const auto o = select_greedy(cs, 40, m);
    EXPECT_EQ(o.chosen, greedy_oracle(cs, 40, m));
    EXPECT_MAT_NEAR(o.fused, maximal_info(cs), 1e-12);
  }
}

TEST(Greedy, TiesGoToLowestId) {
  auto cs = scalar_set(1.0, {2.0, 2.0, 2.0});
  cs.ids = {30, 10, 20};
  const auto o = select_greedy(cs, 2, Measure::Entropy);
  EXPECT_EQ(o.chosen_ids, (std::vector<int>{10, 20}));
}

TEST(Greedy, EdgeCases) {
  auto rng = rng_for(48);
  const auto cs = make_set(rng, 3, 4);
  EXPECT_TRUE(select_greedy(cs, 0, Measure::Entropy).chosen.empty());
  EXPECT_THROW(select_greedy(cs, 5, Measure::Entropy), Error);
  EXPECT_THROW(select_greedy(cs, -1, Measure::Entropy), Error);
  auto with_empty = cs;
  with_empty.infos.push_back(CompactInfo{});
  with_empty.ids.push_back(4);
  const auto o = select_greedy(with_empty, 5, Measure::Variance);
  EXPECT_EQ(o.chosen.back(), 4);
}

TEST(Greedy, MeasureNeverIncreases) {
  auto rng = rng_for(49);
  for (int t = 0; t < 20; ++t) {
    const auto cs = make_set(rng, 4, 10);
    double prev = measure_value(cs.base, Measure::Entropy);
    for (int k = 1; k <= 10; ++k) {
      const double v = measure_value(select_greedy(cs, k, Measure::Entropy).fused, Measure::Entropy);
      EXPECT_LE(v, prev + 1e-12);
      prev = v;
    }
  }
}

TEST(SampleSize, ExamplesAndValidation) {
  EXPECT_EQ(sample_size(3, 0.5, 0.5), 44);
  EXPECT_EQ(sample_size(1, 0.5, 0.25), static_cast<int>(std::ceil(8 * std::log(4.0))));
  EXPECT_THROW(sample_size(0, 0.5, 0.5), Error);
  EXPECT_THROW(sample_size(3, 1.0, 0.5), Error);
  EXPECT_THROW(sample_size(3, 0.5, 0.75), Error);
  EXPECT_THROW(sample_size(3, 0.5, 0.0), Error);
  EXPECT_LT(sample_size(10, 0.5, 0.25), sample_size(11, 0.5, 0.25));
  EXPECT_GT(sample_size(10, 0.4, 0.25), sample_size(10, 0.5, 0.25));
}

TEST(ConeBound, ZetaExamples) {
  std::vector<Mat> bt{0.5 * Mat::Identity(2, 2), 0.5 * Mat::Identity(2, 2)};
  EXPECT_NEAR(cone_zeta(bt, {0, 1}, 10, 0.5), 2.5, 1e-15);
  EXPECT_NEAR(cone_zeta(bt, {0}, 10, 0.5), 5.0, 1e-15);
  EXPECT_TRUE(std::isinf(cone_zeta(bt, {}, 10, 0.5)));
  Mat rank1 = Mat::Zero(2, 2);
  rank1(0, 0) = 1.0;
  EXPECT_TRUE(std::isinf(cone_zeta({rank1}, {0}, 10, 0.5)));
}

TEST(ConeBound, FullSelectionHolds) {
  auto rng = rng_for(50);
  for (int t = 0; t < 30; ++t) {
    const auto cs = make_set(rng, 3, 6);
    std::vector<int> all(cs.size());
    std::iota(all.begin(), all.end(), 0);
    const auto o = finish_outcome(cs, all, 20, Strategy::Randomized, 0);
    const auto check = verify_cone_bound(cs, o, 0.5, 16, static_cast<std::uint64_t>(t));
    EXPECT_NEAR(check.zeta, 20.0 / 3.0 * 0.5, 1e-8);
    EXPECT_GE(check.chi_hat, 0.5 - 1e-9);
    EXPECT_TRUE(check.holds);
    EXPECT_TRUE(check.holds_proof);
  }
}

TEST(ConeBound, EmptySelectionDoesNotHold) {
  auto rng = rng_for(51);
  const auto cs = make_set(rng, 3, 4);
  const auto o = finish_outcome(cs, {}, 5, Strategy::Randomized, 0);
  const auto check = check_cone_bound(cs, b_tilde_matrices(cs), o, 0.5, 1.0);
  EXPECT_FALSE(check.holds);
  EXPECT_TRUE(std::isinf(check.zeta));
}

TEST(StrategyNames, RoundTrip) {
  for (Strategy s : {Strategy::Randomized, Strategy::Uniform, Strategy::Greedy})
    EXPECT_EQ(parse_strategy(to_string(s)), s);
  EXPECT_THROW(parse_strategy("best"), Error);
}
