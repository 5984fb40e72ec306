#include <netsel/estimator.hpp>

#include "support.hpp"

using namespace netsel;
using netsel::test::random_vec3;
using netsel::test::rng_for;

namespace {

Pose looking_at(const Vec3& from, const Vec3& target) {
  return {from, Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), target - from).toRotationMatrix()};
}

InfoState random_state(Rng& rng, Index n) {
  InfoState s;
  s.h = random_spd(rng, n, 0.5);
  s.b = standard_normal(rng, n);
  return s;
}

// Features seen by two robots over a two-step horizon.
std::vector<FeatureInfo> random_features(Rng& rng, int count) {
  std::vector<FeatureInfo> out;
  std::vector<CameraRig> rigs(2);
  while (static_cast<int>(out.size()) < count) {
    const Feature f{static_cast<int>(out.size()), Vec3(0, 0, 20) + 3.0 * random_vec3(rng)};
    std::vector<std::vector<Pose>> poses(2);
    for (auto& step : poses)
      for (int i = 0; i < 2; ++i) step.push_back(looking_at(4.0 * random_vec3(rng), f.position));
    auto fi = feature_info(f, poses, rigs, 2, 1);
    if (fi.triangulated) out.push_back(std::move(fi));
  }
  return out;
}

// Gaussian conditioning in covariance form on a linear model y = C x + v.
std::pair<Vec, Mat> condition(const Vec& mean, const Mat& cov, const Mat& c, const Mat& r, const Vec& y) {
  const Mat s = c * cov * c.transpose() + r;
  const Mat gain = cov * c.transpose() * s.inverse();
  return {mean + gain * (y - c * mean), cov - gain * c * cov};
}

}  // namespace

TEST(FuseNetwork, SingleEdgeExample) {
  InfoState s;
  s.h = Mat::Identity(6, 6);
  s.b = Vec::Zero(6);
  std::vector<CommGraph> g{CommGraph(2, {{0, 1}}, {2.0})};
  std::vector<Vec> xi{Vec3(1, 0, 0)};
  const auto out = fuse_network(s, g, xi);
  Mat expected = Mat::Identity(6, 6);
  expected.topLeftCorner(3, 3) += 2 * Mat::Identity(3, 3);
  expected.bottomRightCorner(3, 3) += 2 * Mat::Identity(3, 3);
  expected.topRightCorner(3, 3) -= 2 * Mat::Identity(3, 3);
  expected.bottomLeftCorner(3, 3) -= 2 * Mat::Identity(3, 3);
  EXPECT_EQ(out.h, expected);
  Vec b(6);
  b << -2, 0, 0, 2, 0, 0;
  EXPECT_EQ(out.b, b);
}

TEST(FuseNetwork, Validation) {
  InfoState s;
  s.h = Mat::Identity(6, 6);
  s.b = Vec::Zero(6);
  std::vector<CommGraph> g{CommGraph(2, {{0, 1}}, {2.0})};
  std::vector<Vec> wrong{Vec::Zero(6)};
  EXPECT_THROW(fuse_network(s, g, wrong), Error);
  std::vector<Vec> none;
  EXPECT_THROW(fuse_network(s, g, none), Error);
  std::vector<CommGraph> two(2, g[0]);
  std::vector<Vec> xi2(2, Vec::Zero(3));
  EXPECT_THROW(fuse_network(s, two, xi2), Error);
  EXPECT_EQ(fuse_network(s, {}, {}).h, s.h);
}

TEST(FuseNetwork, NoiselessMeasurementsRecoverTruth) {
  auto rng = rng_for(60);
  for (int t = 0; t < 50; ++t) {
    const int n = 3, steps = 2;
    const Index dim = 3 * n * steps;
    const Vec truth = standard_normal(rng, dim);
    InfoState s;
    s.h = random_spd(rng, dim);
    s.b = s.h * truth;
    std::vector<CommGraph> graphs;
    std::vector<Vec> xi;
    for (int k = 0; k < steps; ++k) {
      graphs.emplace_back(n, complete_topology(n), std::vector<double>{1.0, 2.0, 0.5});
      Vec m(9);
      const auto& es = graphs.back().edges();
      for (std::size_t e = 0; e < es.size(); ++e)
        m.segment<3>(3 * static_cast<Index>(e)) = truth.segment<3>(3 * n * k + 3 * es[e].to) - truth.segment<3>(3 * n * k + 3 * es[e].from);
      xi.push_back(m);
    }
    const auto est = recover_estimate(fuse_network(s, graphs, xi), n);
    EXPECT_LE((est.mean - truth).norm(), 1e-9 * std::max(1.0, truth.norm()));
  }
}

TEST(FuseNetwork, MatchesCovarianceFormConditioning) {
  auto rng = rng_for(61);
  for (int t = 0; t < 50; ++t) {
    const int n = 3;
    const Index dim = 3 * n * 2;
    InfoState s = random_state(rng, dim);
    std::vector<CommGraph> graphs{CommGraph(n, path_topology(n), {0.7, 1.9}), CommGraph(n, {{0, 2}}, {3.0})};
    std::vector<Vec> xi{standard_normal(rng, 6), standard_normal(rng, 3)};
    // Stacked model rows x_to - x_from with covariance I / w.
    Mat c = Mat::Zero(9, dim), r = Mat::Zero(9, 9);
    Vec y(9);
    int row = 0;
    for (int k = 0; k < 2; ++k)
      for (std::size_t e = 0; e < graphs[k].edges().size(); ++e, ++row) {
        const auto ed = graphs[k].edges()[e];
        c.block(3 * row, 3 * n * k + 3 * ed.to, 3, 3) = Mat::Identity(3, 3);
        c.block(3 * row, 3 * n * k + 3 * ed.from, 3, 3) = -Mat::Identity(3, 3);
        r.block(3 * row, 3 * row, 3, 3) = Mat::Identity(3, 3) / graphs[k].weights()[e];
        y.segment<3>(3 * row) = xi[k].segment<3>(3 * static_cast<Index>(e));
      }
    const Mat cov = s.h.inverse();
    const auto [m, p] = condition(cov * s.b, cov, c, r, y);
    const auto est = recover_estimate(fuse_network(s, graphs, xi), n);
    EXPECT_MAT_NEAR(est.mean, m, 1e-8);
    EXPECT_MAT_NEAR(est.cov, p, 1e-8);
  }
}

TEST(FuseFeatures, MatchesJointSolveWithLandmark) {
  auto rng = rng_for(62);
  for (int t = 0; t < 40; ++t) {
    const auto fs = random_features(rng, 2);
    const Index dim = fs[0].state_dim();
    InfoState s = random_state(rng, dim);
    std::vector<Vec> z;
    for (const auto& fi : fs) z.push_back(standard_normal(rng, 3 * fi.num_frames()));
    // Augment with both landmarks and solve the joint system directly.
    Mat big = Mat::Zero(dim + 6, dim + 6);
    Vec rhs = Vec::Zero(dim + 6);
    big.topLeftCorner(dim, dim) = s.h;
    rhs.head(dim) = s.b;
    for (std::size_t k = 0; k < fs.size(); ++k) {
      const Mat f = fs[k].stacked_f(), e = fs[k].stacked_e();
      const Index y = dim + 3 * static_cast<Index>(k);
      big.topLeftCorner(dim, dim) += f.transpose() * f;
      big.block(0, y, dim, 3) += f.transpose() * e;
      big.block(y, 0, 3, dim) += e.transpose() * f;
      big.block(y, y, 3, 3) += e.transpose() * e;
      rhs.head(dim) += f.transpose() * z[k];
      rhs.segment<3>(y) += e.transpose() * z[k];
    }
    const Vec joint_mean = big.lu().solve(rhs);
    const Mat joint_cov = big.inverse();
    const auto est = recover_estimate(fuse_features(s, fs, z), 2);
    EXPECT_MAT_NEAR(est.mean, Mat(joint_mean.head(dim)), 1e-7);
    EXPECT_MAT_NEAR(est.cov, Mat(joint_cov.topLeftCorner(dim, dim)), 1e-7);
  }
}

TEST(FuseFeatures, OrderDoesNotMatter) {
  auto rng = rng_for(63);
  const auto fs = random_features(rng, 3);
  InfoState s = random_state(rng, fs[0].state_dim());
  std::vector<Vec> z;
  for (const auto& fi : fs) z.push_back(standard_normal(rng, 3 * fi.num_frames()));
  const auto a = fuse_features(s, fs, z);
  std::vector<FeatureInfo> rf(fs.rbegin(), fs.rend());
  std::vector<Vec> rz(z.rbegin(), z.rend());
  const auto b = fuse_features(s, rf, rz);
  EXPECT_MAT_NEAR(a.h, b.h, 1e-12);
  EXPECT_MAT_NEAR(a.b, b.b, 1e-12);
  EXPECT_TRUE(psd_leq(s.h, a.h));
}

TEST(FuseFeatures, Validation) {
  auto rng = rng_for(64);
  auto fs = random_features(rng, 1);
  InfoState s = random_state(rng, fs[0].state_dim());
  std::vector<Vec> shortz{Vec::Zero(3)};
  EXPECT_THROW(fuse_features(s, fs, shortz), Error);
  std::vector<Vec> none;
  EXPECT_THROW(fuse_features(s, fs, none), Error);
  fs[0].triangulated = false;
  std::vector<Vec> z{Vec::Zero(3 * fs[0].num_frames())};
  EXPECT_THROW(fuse_features(s, fs, z), Error);
}

TEST(Recover, RoundTripsGaussian) {
  auto rng = rng_for(65);
  HorizonGaussian hg;
  hg.num_robots = 2;
  hg.horizon = 2;
  hg.mean = standard_normal(rng, 18);
  hg.cov = random_spd(rng, 18);
  const auto s = InfoState::from_gaussian(hg, 4);
  EXPECT_EQ(s.t, 4);
  const auto back = recover_estimate(s, 2);
  EXPECT_EQ(back.horizon, 2);
  EXPECT_MAT_NEAR(back.mean, hg.mean, 1e-9);
  EXPECT_MAT_NEAR(back.cov, hg.cov, 1e-9);
  InfoState bad;
  bad.h = Mat::Zero(3, 3);
  bad.b = Vec::Zero(3);
  EXPECT_THROW(recover_estimate(bad, 1), Error);
}

TEST(Performance, Examples) {
  InfoState s;
  s.h = 2.0 * Mat::Identity(3, 3);
  s.b = Vec::Zero(3);
  EXPECT_DOUBLE_EQ(performance(s, Measure::Variance), 1.5);
  EXPECT_NEAR(performance(s, Measure::Entropy), -3 * std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(performance(s, Measure::Spectral), 0.5);
}

TEST(CovarianceRatio, Examples) {
  Vec d(3);
  d << 1, 2, 3;
  const auto r = covariance_ratio(Mat(d.asDiagonal()), 0.5 * Mat3::Identity());
  EXPECT_DOUBLE_EQ(r.psi, 2.0);
  EXPECT_DOUBLE_EQ(r.psi_max, 6.0);
  Mat3 lambda = Mat3::Identity();
  lambda(2, 2) = 0.25;
  EXPECT_DOUBLE_EQ(covariance_ratio(Mat::Identity(6, 6), lambda).psi, 4.0);
}
