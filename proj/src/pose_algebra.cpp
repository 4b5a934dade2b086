#include "radarloc/pose_algebra.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace radarloc::pose {

namespace {
constexpr double kUnitTol = 1e-6;
constexpr double kPi = 3.14159265358979323846;
}  // namespace

Quaternion quat_identity() { return {1.0, Eigen::Vector3d::Zero()}; }

Quaternion quat_normalize(const Quaternion& q) {
  const double n = q.norm();
  if (n <= 0.0 || !std::isfinite(n))
    throw std::domain_error("quat_normalize: degenerate quaternion");
  return {q.u / n, q.v / n};
}

Quaternion quat_canonicalize(const Quaternion& q) {
  double s = 0.0;
  if (q.u != 0.0) {
    s = q.u > 0.0 ? 1.0 : -1.0;
  } else {
    for (int i = 0; i < 3 && s == 0.0; ++i)
      if (q.v[i] != 0.0) s = q.v[i] > 0.0 ? 1.0 : -1.0;
    if (s == 0.0) s = 1.0;
  }
  return {s * q.u, s * q.v};
}

Quaternion quat_multiply(const Quaternion& a, const Quaternion& b) {
  return {a.u * b.u - a.v.dot(b.v), a.u * b.v + b.u * a.v + a.v.cross(b.v)};
}

Eigen::Matrix3d quat_to_matrix(const Quaternion& q) {
  const double w = q.u, x = q.v[0], y = q.v[1], z = q.v[2];
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Eigen::Vector3d quat_rotate(const Quaternion& q, const Eigen::Vector3d& x) {
  // q (0, x) q^-1 for unit q
  const Eigen::Vector3d t = 2.0 * q.v.cross(x);
  return x + q.u * t + q.v.cross(t);
}

double quat_dot(const Quaternion& a, const Quaternion& b) {
  return a.u * b.u + a.v.dot(b.v);
}

Eigen::Vector3d quat_log(const Quaternion& q) {
  if (std::abs(q.norm() - 1.0) > kUnitTol)
    throw std::domain_error("quat_log: non-unit quaternion");
  const Quaternion c = quat_canonicalize(q);
  const double a = c.v.norm();
  if (a == 0.0) return Eigen::Vector3d::Zero();
  // atan2 agrees with acos(u) for unit input and is stable near u = 1
  const double theta = std::atan2(a, c.u);
  return (theta / a) * c.v;
}

Quaternion quat_exp(const Eigen::Vector3d& w) {
  const double th = w.norm();
  double snc;
  if (th < 1e-8) {
    const double t2 = th * th;
    snc = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
  } else {
    snc = std::sin(th) / th;
  }
  Quaternion q{std::cos(th), snc * w};
  return quat_normalize(q);
}

LogPose to_log_pose(const Pose& pose) { return {pose.p, quat_log(pose.q)}; }

Pose from_log_pose(const LogPose& lp, std::int64_t timestamp) {
  return {lp.p, quat_exp(lp.w), timestamp};
}

Pose relative_pose(const Pose& pi, const Pose& pj) {
  Pose rel;
  rel.p = quat_rotate(pi.q.conjugate(), pj.p - pi.p);
  rel.q = quat_canonicalize(quat_multiply(pi.q.conjugate(), pj.q));
  rel.timestamp = pj.timestamp;
  return rel;
}

Pose compose(const Pose& pi, const Pose& rel) {
  Pose pj;
  pj.p = pi.p + quat_rotate(pi.q, rel.p);
  pj.q = quat_canonicalize(quat_multiply(pi.q, rel.q));
  pj.timestamp = rel.timestamp;
  return pj;
}

std::pair<double, double> pose_error(const Pose& pred, const Pose& gt) {
  const double te = (pred.p - gt.p).norm();
  double d = std::abs(quat_dot(pred.q, gt.q));
  if (d > 1.0) d = 1.0;
  const double re = 2.0 * std::acos(d) * 180.0 / kPi;
  return {te, re};
}

double pose_yaw(const Quaternion& q) {
  const double w = q.u, x = q.v[0], y = q.v[1], z = q.v[2];
  return std::atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z));
}

void write_pose_csv(const std::string& path, const std::vector<Pose>& poses) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_pose_csv: cannot open " + path);
  out << "timestamp_ns,px,py,pz,qu,qx,qy,qz\n";
  char buf[64];
  for (const Pose& ps : poses) {
    out << ps.timestamp;
    const double vals[7] = {ps.p[0], ps.p[1], ps.p[2], ps.q.u,
                            ps.q.v[0], ps.q.v[1], ps.q.v[2]};
    for (double v : vals) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write_pose_csv: write failed " + path);
}

std::vector<Pose> read_pose_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_pose_csv: cannot open " + path);
  std::vector<Pose> poses;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first && line.rfind("timestamp", 0) == 0) {
      first = false;
      continue;
    }
    first = false;
    std::istringstream ss(line);
    std::string f;
    double vals[7];
    Pose ps;
    if (!std::getline(ss, f, ','))
      throw std::runtime_error("read_pose_csv: bad row in " + path);
    ps.timestamp = std::stoll(f);
    for (int i = 0; i < 7; ++i) {
      if (!std::getline(ss, f, ','))
        throw std::runtime_error("read_pose_csv: short row in " + path);
      vals[i] = std::stod(f);
    }
    ps.p = {vals[0], vals[1], vals[2]};
    ps.q = {vals[3], {vals[4], vals[5], vals[6]}};
    poses.push_back(ps);
  }
  return poses;
}

}  // namespace radarloc::pose
