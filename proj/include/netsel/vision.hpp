#pragma once

// Camera geometry, visibility over the prediction horizon, and the per-feature
// information matrix obtained by marginalizing the unknown landmark position
// out of the stacked bearing model
//   z = F x + E y_f + eta,   F rows = U (R R_c)^T,  E rows = -U (R R_c)^T.

#include <netsel/compact.hpp>
#include <netsel/matkit.hpp>
#include <netsel/rng.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace netsel {

struct Feature {
  int id = 0;
  Vec3 position = Vec3::Zero();
};

struct CameraRig {
  Mat3 mount_rotation = Mat3::Identity();
  Vec3 mount_offset = Vec3::Zero();
  double pixel_sigma = 0.05;
  double fov_half_angle = std::numbers::pi / 3.0;
  double max_range = 40.0;

  void validate() const {
    if ((mount_rotation.transpose() * mount_rotation - Mat3::Identity()).norm() > 1e-10 ||
        std::abs(mount_rotation.determinant() - 1.0) > 1e-10)
      throw Error("camera rig: mounting rotation is not a rotation");
    if (!(pixel_sigma > 0.0)) throw Error("camera rig: sigma must be positive");
    if (!(fov_half_angle > 0.0) || !(max_range > 0.0))
      throw Error("camera rig: field of view and range must be positive");
  }
};

struct Pose {
  Vec3 position = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
};

/// skew(u) v = u x v.
inline Mat3 skew(const Vec3& u) {
  Mat3 s;
  s << 0.0, -u.z(), u.y(),
       u.z(), 0.0, -u.x(),
       -u.y(), u.x(), 0.0;
  return s;
}

/// R = R_z(gamma) R_y(beta) R_x(alpha) for angles = (alpha, beta, gamma).
inline Mat3 euler_zyx(const Vec3& angles) {
  using Eigen::AngleAxisd;
  return (AngleAxisd(angles.z(), Vec3::UnitZ()) * AngleAxisd(angles.y(), Vec3::UnitY()) *
          AngleAxisd(angles.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

inline Mat3 camera_rotation(const Pose& pose, const CameraRig& rig) {
  return pose.rotation * rig.mount_rotation;
}

inline Vec3 camera_center(const Pose& pose, const CameraRig& rig) {
  return pose.position + pose.rotation * rig.mount_offset;
}

/// Unit bearing of the feature in the camera frame (boresight = +z), or
/// nothing when it lies outside the FOV cone or beyond max range.
inline std::optional<Vec3> visible_bearing(const Feature& f, const Pose& pose, const CameraRig& rig) {
  const Vec3 d = camera_rotation(pose, rig).transpose() * (f.position - camera_center(pose, rig));
  const double range = d.norm();
  if (!(range > 0.0) || range > rig.max_range) return std::nullopt;
  const Vec3 u = d / range;
  if (u.z() < std::cos(rig.fov_half_angle)) return std::nullopt;
  return u;
}

struct Observation {
  Vec3 bearing;
  Vec3 z;
};

/// Bearing plus the measurement z = U^T R_c^T x_c + eta, eta ~ N(0, sigma^2 I).
inline std::optional<Observation> observe(const Feature& f, const Pose& pose, const CameraRig& rig,
                                          Rng& rng, bool sample_noise = true) {
  const auto u = visible_bearing(f, pose, rig);
  if (!u) return std::nullopt;
  Observation obs;
  obs.bearing = *u;
  obs.z = skew(*u).transpose() * rig.mount_rotation.transpose() * rig.mount_offset;
  if (sample_noise) obs.z += rig.pixel_sigma * Vec3(standard_normal(rng, 3));
  return obs;
}

/// One visible frame of a feature: robot, horizon step, and the 3x3 row
/// block U (R R_c)^T of the stacked model.
struct FeatureFrame {
  int robot = 0;
  int step = 0;
  Mat3 rows = Mat3::Zero();
  double sigma = 1.0;
};

/// Stacked observation model of one feature over the horizon and its
/// landmark-marginalized information matrix.
struct FeatureInfo {
  int id = 0;
  int num_robots = 1;
  int horizon = 0;
  std::vector<FeatureFrame> frames;
  bool triangulated = false;
  CompactInfo info;  ///< H^f; empty when not triangulated

  Index state_dim() const { return 3 * num_robots * (horizon + 1); }
  int num_frames() const { return static_cast<int>(frames.size()); }
  Index slot(const FeatureFrame& fr) const { return 3 * (num_robots * fr.step + fr.robot); }

  /// Whitened stacked F (3 n_f x 3N(M+1)).
  Mat stacked_f() const {
    Mat f = Mat::Zero(3 * num_frames(), state_dim());
    for (int k = 0; k < num_frames(); ++k)
      f.block(3 * k, slot(frames[k]), 3, 3) = frames[k].rows / frames[k].sigma;
    return f;
  }
  /// Whitened stacked E (3 n_f x 3).
  Mat stacked_e() const {
    Mat e(3 * num_frames(), 3);
    for (int k = 0; k < num_frames(); ++k) e.block(3 * k, 0, 3, 3) = -frames[k].rows / frames[k].sigma;
    return e;
  }
  /// Joint information of (x, y_f).
  Mat omega() const {
    const Mat f = stacked_f(), e = stacked_e();
    Mat out(state_dim() + 3, state_dim() + 3);
    out << f.transpose() * f, f.transpose() * e, e.transpose() * f, e.transpose() * e;
    return out;
  }
  Mat dense_info() const { return info.dense(state_dim()); }
};

/// Marginalized contribution of a subset of frames: H = F^T (I - P_E) F and
/// b = F^T (I - P_E) z over the compact state slots, with P_E the projector
/// onto range(E). Uses a pseudo-inverse, which is the flat-prior limit when
/// the landmark is only partially observed. `z_whitened` holds the
/// measurements divided by their sigma, 3 rows per frame.
struct MarginalContribution {
  CompactInfo info;
  Vec vector;  ///< over info.indices
};

inline MarginalContribution marginal_contribution(const FeatureInfo& fi,
                                                  std::span<const int> frame_ids,
                                                  const Vec& z_whitened) {
  MarginalContribution out;
  if (frame_ids.empty()) return out;
  std::vector<Index> slots;
  for (int k : frame_ids) slots.push_back(fi.slot(fi.frames[k]));
  std::sort(slots.begin(), slots.end());
  slots.erase(std::unique(slots.begin(), slots.end()), slots.end());
  for (Index s : slots)
    for (Index c = 0; c < 3; ++c) out.info.indices.push_back(s + c);
  const auto rows = static_cast<Index>(3 * frame_ids.size());
  Mat f = Mat::Zero(rows, static_cast<Index>(out.info.indices.size()));
  Mat e(rows, 3);
  for (std::size_t r = 0; r < frame_ids.size(); ++r) {
    const auto& fr = fi.frames[frame_ids[r]];
    const auto col = std::lower_bound(slots.begin(), slots.end(), fi.slot(fr)) - slots.begin();
    f.block(3 * r, 3 * col, 3, 3) = fr.rows / fr.sigma;
    e.block(3 * r, 0, 3, 3) = -fr.rows / fr.sigma;
  }
  const Mat ete = e.transpose() * e;
  const Mat ete_pinv = Eigen::CompleteOrthogonalDecomposition<Mat>(ete).pseudoInverse();
  const Mat proj = Mat::Identity(rows, rows) - e * ete_pinv * e.transpose();
  out.info.block = symmetrized(f.transpose() * proj * f);
  out.vector = f.transpose() * (proj * z_whitened);
  return out;
}

/// Builds F, E and H^f for a feature from the predicted poses
/// `poses[step][robot]`, considering frames with step >= first_step.
inline FeatureInfo feature_info(const Feature& feature,
                                const std::vector<std::vector<Pose>>& poses,
                                const std::vector<CameraRig>& rigs, int num_robots, int horizon,
                                int first_step = 0, double cond_limit = kConditionLimit) {
  if (poses.size() != static_cast<std::size_t>(horizon) + 1)
    throw Error("feature_info: need poses for every horizon step");
  if (rigs.size() != static_cast<std::size_t>(num_robots))
    throw Error("feature_info: need one camera rig per robot");
  FeatureInfo fi;
  fi.id = feature.id;
  fi.num_robots = num_robots;
  fi.horizon = horizon;
  for (int k = first_step; k <= horizon; ++k) {
    if (poses[k].size() != static_cast<std::size_t>(num_robots))
      throw Error("feature_info: incomplete poses");
    for (int i = 0; i < num_robots; ++i) {
      const auto u = visible_bearing(feature, poses[k][i], rigs[i]);
      if (!u) continue;
      fi.frames.push_back({i, k, skew(*u) * camera_rotation(poses[k][i], rigs[i]).transpose(),
                           rigs[i].pixel_sigma});
    }
  }
  if (fi.frames.empty()) return fi;

  Mat ete = Mat3::Zero();
  for (const auto& fr : fi.frames) ete += fr.rows.transpose() * fr.rows / (fr.sigma * fr.sigma);
  if (!(sym_condition(ete) < cond_limit)) return fi;

  std::vector<int> all(fi.frames.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = static_cast<int>(k);
  auto contrib = marginal_contribution(fi, all, Vec::Zero(3 * fi.num_frames()));
  fi.info = std::move(contrib.info);
  fi.triangulated = true;
  return fi;
}

/// Axis-aligned box.
struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Ones();
};

inline std::vector<Feature> generate_features(const Box& box, int count, std::uint64_t seed) {
  if (count < 0) throw Error("generate_features: negative count");
  if (!((box.hi - box.lo).minCoeff() > 0.0)) throw Error("generate_features: degenerate box");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Feature> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    Vec3 p;
    for (int a = 0; a < 3; ++a) p(a) = box.lo(a) + (box.hi(a) - box.lo(a)) * unit(rng);
    out.push_back({k, p});
  }
  return out;
}

/// Reads `id,x,y,z` rows; a non-numeric first line is treated as a header.
inline std::vector<Feature> load_features_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open feature file " + path.string());
  std::vector<Feature> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    Feature f;
    if (!(ss >> f.id >> f.position.x() >> f.position.y() >> f.position.z())) {
      if (lineno == 1) continue;
      throw Error(path.string() + ":" + std::to_string(lineno) + ": malformed feature row");
    }
    if (!f.position.allFinite())
      throw Error(path.string() + ":" + std::to_string(lineno) + ": non-finite coordinate");
    out.push_back(f);
  }
  return out;
}

}  // namespace netsel
