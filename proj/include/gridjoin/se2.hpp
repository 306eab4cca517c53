#pragma once

#include <Eigen/Core>
#include <cmath>

namespace gridjoin {

inline constexpr double kPi = 3.14159265358979323846;

// Wraps an angle to (-pi, pi].
inline double normalize_angle(double a) {
  double r = std::fmod(a + kPi, 2.0 * kPi);
  if (r <= 0.0) r += 2.0 * kPi;
  return r - kPi;
}

/// A frame in SE(2): position t in the parent frame and heading theta,
/// kept in (-pi, pi].
struct Pose2 {
  Eigen::Vector2d t{0.0, 0.0};
  double theta = 0.0;
};

// Rotation that maps displacements expressed in the parent frame into this
// frame: local = rot_matrix(theta) * (world - t). Note this is the
// transpose of the usual CCW rotation matrix.
inline Eigen::Matrix2d rot_matrix(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Eigen::Matrix2d r;
  r << c, s, -s, c;
  return r;
}

inline Eigen::Vector2d world_to_local(const Pose2& pose,
                                      const Eigen::Vector2d& p_world) {
  return rot_matrix(pose.theta) * (p_world - pose.t);
}

inline Eigen::Vector2d local_to_world(const Pose2& pose,
                                      const Eigen::Vector2d& p_local) {
  return pose.t + rot_matrix(pose.theta).transpose() * p_local;
}

// Composes b (expressed in a's frame) onto a.
inline Pose2 compose(const Pose2& a, const Pose2& b) {
  return {a.t + rot_matrix(a.theta).transpose() * b.t,
          normalize_angle(a.theta + b.theta)};
}

inline Pose2 inverse(const Pose2& a) {
  return {-(rot_matrix(a.theta) * a.t), normalize_angle(-a.theta)};
}

// Relative pose taking frame a to frame b, expressed in a.
inline Pose2 between(const Pose2& a, const Pose2& b) {
  return compose(inverse(a), b);
}

/// Projects the center of a global grid cell (index times resolution) into
/// a local frame, in meters. Converting the result to the local grid's own
/// cell coordinates is the caller's job.
inline Eigen::Vector2d project_global_to_local(const Pose2& pose,
                                               const Eigen::Vector2i& cell,
                                               double resolution) {
  return world_to_local(pose, cell.cast<double>() * resolution);
}

// Derivative of world_to_local at a fixed world point w.r.t. (tx, ty,
// theta): the 2x3 block [-R | dR/dtheta * (w - t)].
inline Eigen::Matrix<double, 2, 3> dworld_to_local_dpose(
    const Pose2& pose, const Eigen::Vector2d& p_world) {
  const double c = std::cos(pose.theta);
  const double s = std::sin(pose.theta);
  const Eigen::Vector2d d = p_world - pose.t;
  Eigen::Matrix<double, 2, 3> j;
  j(0, 0) = -c;
  j(0, 1) = -s;
  j(0, 2) = -s * d.x() + c * d.y();
  j(1, 0) = s;
  j(1, 1) = -c;
  j(1, 2) = -c * d.x() - s * d.y();
  return j;
}

inline Eigen::Matrix<double, 2, 3> dproj_dpose(const Pose2& pose,
                                               const Eigen::Vector2i& cell,
                                               double resolution) {
  return dworld_to_local_dpose(pose, cell.cast<double>() * resolution);
}

}  // namespace gridjoin
