#pragma once

// Team dynamics x_tau = A x_{tau-1} + B u_tau + delta_tau, the reference
// lanes the robots follow, and horizon-stacked prediction of the team state.

#include <netsel/matkit.hpp>
#include <netsel/rng.hpp>

#include <cmath>
#include <numbers>
#include <vector>

namespace netsel {

/// Per-robot linear model, replicated over the team as I_N (x) A etc.
struct TeamDynamics {
  int num_robots = 1;
  Mat3 a = Mat3::Identity();
  Mat3 b = Mat3::Identity();
  Mat3 process_noise = 0.01 * Mat3::Identity();

  Index state_dim() const { return 3 * num_robots; }
  Mat team_a() const { return kron(Mat::Identity(num_robots, num_robots), a); }
  Mat team_b() const { return kron(Mat::Identity(num_robots, num_robots), b); }
  Mat team_noise() const { return kron(Mat::Identity(num_robots, num_robots), process_noise); }

  void validate() const {
    if (num_robots < 1) throw Error("dynamics: need at least one robot");
    Eigen::LLT<Mat3> llt(process_noise);
    if (llt.info() != Eigen::Success) throw Error("dynamics: process noise must be SPD");
  }
};

/// Parameters of the reference lanes. Robot indices are 1-based here to
/// match the lane formula.
struct ReferencePlan {
  int num_robots = 10;
  int horizon = 20;
  int end_time = 200;
  double lane_scale = 1e4;
};

struct RefPoint {
  Vec3 position;
  Vec3 euler;  ///< (alpha, beta, gamma): rotations about x, y, z
};

inline RefPoint reference_trajectory(const ReferencePlan& plan, int robot, double tau) {
  using std::numbers::pi;
  const double n = plan.num_robots;
  const double te = plan.end_time;
  const double offset = robot - n / 2.0;
  const double wave = std::sin(4.0 * pi / (n * te) * offset * tau);
  RefPoint out;
  out.position = Vec3(plan.lane_scale * ((robot + 0.5) + 0.1 * std::sin(pi / 10.0 * tau)),
                      -2.0 * (te + plan.horizon) / te + 10.0 * tau / te, wave);
  out.euler = Vec3(0.0, pi / 2.0 + pi / 5.0 * wave,
                   pi / 2.0 + pi / 10.0 * std::sin(pi / n * offset + pi / 10.0 * tau));
  return out;
}

/// Stacked reference positions of the whole team at time tau (3N).
inline Vec reference_team(const ReferencePlan& plan, double tau) {
  Vec out(3 * plan.num_robots);
  for (int i = 0; i < plan.num_robots; ++i)
    out.segment<3>(3 * i) = reference_trajectory(plan, i + 1, tau).position;
  return out;
}

/// delta ~ N(0, I_N (x) Lambda).
inline Vec sample_process_noise(const TeamDynamics& dyn, Rng& rng) {
  const Eigen::LLT<Mat3> chol(dyn.process_noise);
  Vec out(dyn.state_dim());
  for (int i = 0; i < dyn.num_robots; ++i)
    out.segment<3>(3 * i) = chol.matrixL() * Vec3(standard_normal(rng, 3));
  return out;
}

/// One step of the true team state. With `sample_noise` false the step is
/// deterministic.
inline Vec step_truth(const TeamDynamics& dyn, const Vec& state, const Vec& control,
                      Rng& rng, bool sample_noise = true) {
  if (state.size() != dyn.state_dim() || control.size() != dyn.state_dim())
    throw Error("step_truth: dimension mismatch");
  Vec next(dyn.state_dim());
  for (int i = 0; i < dyn.num_robots; ++i)
    next.segment<3>(3 * i) = dyn.a * state.segment<3>(3 * i) + dyn.b * control.segment<3>(3 * i);
  if (sample_noise) next += sample_process_noise(dyn, rng);
  return next;
}

/// Dead-beat tracking on the estimate: u = ref_next - mean_est.
inline Vec tracking_control(const Vec& ref_next, const Vec& mean_est) {
  if (ref_next.size() != mean_est.size()) throw Error("tracking_control: dimension mismatch");
  return ref_next - mean_est;
}

/// Gaussian over the stacked horizon state x_{t:t+M}.
struct HorizonGaussian {
  int num_robots = 1;
  int horizon = 0;
  Vec mean;
  Mat cov;

  Index dim() const { return 3 * num_robots * (horizon + 1); }
  Index step_dim() const { return 3 * num_robots; }
  Vec step_mean(int k) const { return mean.segment(k * step_dim(), step_dim()); }
  Mat step_cov(int k) const {
    return cov.block(k * step_dim(), k * step_dim(), step_dim(), step_dim());
  }
};

/// Means under explicit controls: mean_k = A mean_{k-1} + B u_k for k = 1..M.
inline Vec propagate_mean(const TeamDynamics& dyn, const Vec& init_mean,
                          const std::vector<Vec>& controls) {
  const Index d = dyn.state_dim();
  Vec out(d * static_cast<Index>(controls.size() + 1));
  out.head(d) = init_mean;
  const Mat ta = dyn.team_a(), tb = dyn.team_b();
  for (std::size_t k = 0; k < controls.size(); ++k)
    out.segment(d * (k + 1), d) = ta * out.segment(d * k, d) + tb * controls[k];
  return out;
}

/// Stacked covariance with Sigma_k = A Sigma_{k-1} A^T + I_N (x) Lambda and
/// cross blocks Cov(x_{k2}, x_{k1}) = A^{k2-k1} Sigma_{k1} below the diagonal.
inline Mat propagate_cov(const TeamDynamics& dyn, const Mat& init_cov, int horizon) {
  const Index d = dyn.state_dim();
  const Mat ta = dyn.team_a(), q = dyn.team_noise();
  Mat cov = Mat::Zero(d * (horizon + 1), d * (horizon + 1));
  Mat sigma = symmetrized(init_cov);
  for (int k1 = 0; k1 <= horizon; ++k1) {
    if (k1 > 0) sigma = symmetrized(ta * sigma * ta.transpose() + q);
    cov.block(d * k1, d * k1, d, d) = sigma;
    Mat cross = sigma;
    for (int k2 = k1 + 1; k2 <= horizon; ++k2) {
      cross = ta * cross;
      cov.block(d * k2, d * k1, d, d) = cross;
      cov.block(d * k1, d * k2, d, d) = cross.transpose();
    }
  }
  return cov;
}

/// Predicts x_{t:t+M} with the tracking law applied to the predicted mean.
inline HorizonGaussian predict_horizon(const TeamDynamics& dyn, const ReferencePlan& plan,
                                       const Vec& init_mean, const Mat& init_cov, int t) {
  dyn.validate();
  if (init_mean.size() != dyn.state_dim() || init_cov.rows() != dyn.state_dim())
    throw Error("predict_horizon: dimension mismatch");
  const Mat ta = dyn.team_a();
  std::vector<Vec> controls;
  Vec mu = init_mean;
  for (int k = 1; k <= plan.horizon; ++k) {
    controls.push_back(tracking_control(reference_team(plan, t + k), mu));
    mu = ta * mu + dyn.team_b() * controls.back();
  }
  HorizonGaussian hg;
  hg.num_robots = dyn.num_robots;
  hg.horizon = plan.horizon;
  hg.mean = propagate_mean(dyn, init_mean, controls);
  hg.cov = propagate_cov(dyn, init_cov, plan.horizon);
  return hg;
}

/// Prior information matrix, the inverse of the stacked covariance.
inline Mat prior_info(const HorizonGaussian& hg) {
  Eigen::LLT<Mat> llt(symmetrized(hg.cov));
  if (llt.info() != Eigen::Success) throw Error("prior_info: covariance is not positive definite");
  const Vec d = llt.matrixLLT().diagonal();
  if (!(d.minCoeff() > 1e-7 * d.maxCoeff())) throw Error("prior_info: covariance is near-singular");
  return symmetrized(llt.solve(Mat::Identity(hg.dim(), hg.dim())));
}

}  // namespace netsel
