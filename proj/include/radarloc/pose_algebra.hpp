#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace radarloc::pose {

// Scalar-first unit quaternion [u, v]. Canonical hemisphere is u >= 0;
// ties (u == 0) put the first nonzero component of v positive.
struct Quaternion {
  double u = 1.0;
  Eigen::Vector3d v = Eigen::Vector3d::Zero();

  double norm() const { return std::sqrt(u * u + v.squaredNorm()); }
  Quaternion conjugate() const { return {u, -v}; }
};

Quaternion quat_identity();
Quaternion quat_normalize(const Quaternion& q);
Quaternion quat_canonicalize(const Quaternion& q);
Quaternion quat_multiply(const Quaternion& a, const Quaternion& b);
Eigen::Matrix3d quat_to_matrix(const Quaternion& q);
Eigen::Vector3d quat_rotate(const Quaternion& q, const Eigen::Vector3d& x);
double quat_dot(const Quaternion& a, const Quaternion& b);

// w = (v/|v|) * acos(u) after canonicalization, zero vector at identity.
// Throws std::domain_error when |q| deviates from 1 by more than 1e-6.
Eigen::Vector3d quat_log(const Quaternion& q);

// q = (cos|w|, sin|w| * w/|w|), unit by construction.
Quaternion quat_exp(const Eigen::Vector3d& w);

struct Pose {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Quaternion q;
  std::int64_t timestamp = 0;
};

struct LogPose {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Vector3d w = Eigen::Vector3d::Zero();
};

LogPose to_log_pose(const Pose& pose);
Pose from_log_pose(const LogPose& lp, std::int64_t timestamp = 0);

// Rigid transform taking frame i to frame j:
// translation R(q_i)^T (p_j - p_i), rotation q_i^-1 * q_j, canonicalized.
Pose relative_pose(const Pose& pi, const Pose& pj);

// Inverse of relative_pose: compose(pi, relative_pose(pi, pj)) == pj.
Pose compose(const Pose& pi, const Pose& rel);

// (translation error meters, rotation error degrees)
std::pair<double, double> pose_error(const Pose& pred, const Pose& gt);

// yaw of the 3-DoF (x, y, yaw) projection, radians
double pose_yaw(const Quaternion& q);

// csv rows: timestamp_ns,px,py,pz,qu,qx,qy,qz (one header line).
// Values are written with enough digits to round-trip exactly.
void write_pose_csv(const std::string& path, const std::vector<Pose>& poses);
std::vector<Pose> read_pose_csv(const std::string& path);

}  // namespace radarloc::pose
