#pragma once

// Information-form estimation over the stacked horizon state: fusion of
// relative measurements and selected features, recovery of mean and
// covariance, and the performance measures of the fused information matrix.

#include <netsel/compact.hpp>
#include <netsel/matkit.hpp>
#include <netsel/motion.hpp>
#include <netsel/netgraph.hpp>
#include <netsel/vision.hpp>

#include <span>
#include <string>
#include <vector>

namespace netsel {

struct InfoState {
  Vec b;  ///< information vector H mu
  Mat h;  ///< information matrix
  int t = 0;

  Index dim() const { return h.rows(); }

  static InfoState from_gaussian(const HorizonGaussian& hg, int t = 0) {
    InfoState s;
    s.h = prior_info(hg);
    s.b = s.h * hg.mean;
    s.t = t;
    return s;
  }
};

/// Relative measurements of one step, 3 entries per edge in edge order.
using RelativeMeasurements = Vec;

/// Adds blkdiag(L_tau (x) I3) to H and C P^{-1} xi to b for every step.
inline InfoState fuse_network(InfoState state, std::span<const CommGraph> graphs,
                              std::span<const RelativeMeasurements> xi) {
  if (graphs.empty()) return state;
  if (graphs.size() != xi.size()) throw Error("fuse_network: one measurement vector per graph");
  const Index step = 3 * graphs.front().num_nodes();
  if (step * static_cast<Index>(graphs.size()) != state.dim())
    throw Error("fuse_network: graphs do not cover the horizon state");
  state.h += horizon_network_info(graphs, static_cast<int>(graphs.size()) - 1);
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    const auto& g = graphs[k];
    if (xi[k].size() != 3 * static_cast<Index>(g.edges().size()))
      throw Error("fuse_network: measurement length does not match edge count");
    const Index off = step * static_cast<Index>(k);
    for (std::size_t e = 0; e < g.edges().size(); ++e) {
      const Vec3 wxi = g.weights()[e] * xi[k].segment<3>(3 * static_cast<Index>(e));
      state.b.segment<3>(off + 3 * g.edges()[e].from) -= wxi;
      state.b.segment<3>(off + 3 * g.edges()[e].to) += wxi;
    }
  }
  return state;
}

/// Adds each selected feature's H^f and its landmark-marginalized vector
/// b^f = F^T (I - E (E^T E)^{-1} E^T) z, all quantities whitened by sigma.
/// `z_whitened[k]` holds the stacked measurements of `features[k]` divided by
/// their sigma.
inline InfoState fuse_features(InfoState state, std::span<const FeatureInfo> features,
                               std::span<const Vec> z_whitened) {
  if (features.size() != z_whitened.size()) throw Error("fuse_features: one measurement stack per feature");
  for (std::size_t k = 0; k < features.size(); ++k) {
    const auto& fi = features[k];
    if (!fi.triangulated) throw Error("fuse_features: feature " + std::to_string(fi.id) + " is not triangulated");
    if (fi.state_dim() != state.dim()) throw Error("fuse_features: dimension mismatch");
    if (z_whitened[k].size() != 3 * fi.num_frames()) throw Error("fuse_features: measurement length mismatch");
    std::vector<int> all(fi.frames.size());
    for (std::size_t j = 0; j < all.size(); ++j) all[j] = static_cast<int>(j);
    const auto contrib = marginal_contribution(fi, all, z_whitened[k]);
    contrib.info.add_to(state.h);
    for (std::size_t a = 0; a < contrib.info.indices.size(); ++a)
      state.b(contrib.info.indices[a]) += contrib.vector(static_cast<Index>(a));
  }
  state.h = symmetrized(state.h);
  return state;
}

/// mean = H^{-1} b, cov = H^{-1}.
inline HorizonGaussian recover_estimate(const InfoState& state, int num_robots) {
  Eigen::LLT<Mat> llt(symmetrized(state.h));
  if (llt.info() != Eigen::Success) throw Error("recover_estimate: information matrix is singular");
  HorizonGaussian hg;
  hg.num_robots = num_robots;
  hg.horizon = static_cast<int>(state.dim() / (3 * num_robots)) - 1;
  hg.mean = llt.solve(state.b);
  hg.cov = symmetrized(llt.solve(Mat::Identity(state.dim(), state.dim())));
  return hg;
}

inline double performance(const InfoState& state, Measure m) { return measure_value(state.h, m); }

/// psi = rho_lambda(H_t) / lambda_min(I_N (x) Lambda), where H_t is the
/// information of the current step and rho_lambda = lambda_min(H_t^{-1}).
/// Also returns the lambda_max variant.
struct CovarianceRatio {
  double psi = 0.0;
  double psi_max = 0.0;
};

inline CovarianceRatio covariance_ratio(const Mat& step_cov, const Mat3& process_noise) {
  const Vec ev = sym_eigenvalues(step_cov);
  const double denom = sym_eigenvalues(process_noise)(0);
  return {std::max(ev(0), 0.0) / denom, std::max(ev(ev.size() - 1), 0.0) / denom};
}

}  // namespace netsel
