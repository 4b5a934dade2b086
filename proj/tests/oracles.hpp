#pragma once

// Independent reference implementations the tests check the library
// against. Everything here is written from first principles (or routed
// through Eigen's own quaternion type) so a shared bug with the library
// code is unlikely.

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <functional>
#include <vector>

#include "radarloc/autodiff.hpp"
#include "radarloc/pose_algebra.hpp"
#include "radarloc/rng.hpp"
#include "radarloc/tensor.hpp"

namespace oracles {

using radarloc::Rng;
using radarloc::Tensor;

// --- quaternions via Eigen (w, x, y, z) ------------------------------------

inline Eigen::Quaterniond to_eigen(const radarloc::pose::Quaternion& q) {
  return Eigen::Quaterniond(q.u, q.v[0], q.v[1], q.v[2]);
}

inline radarloc::pose::Quaternion from_eigen(const Eigen::Quaterniond& e) {
  return {e.w(), Eigen::Vector3d(e.x(), e.y(), e.z())};
}

// log through Eigen's angle-axis decomposition: w = axis * angle / 2
// for the half-angle convention of a unit quaternion
inline Eigen::Vector3d quat_log_ref(const radarloc::pose::Quaternion& q) {
  radarloc::pose::Quaternion c = q;
  // same canonical hemisphere the library promises
  double lead = c.u;
  if (lead == 0.0) {
    for (int k = 0; k < 3; ++k)
      if (c.v[k] != 0.0) {
        lead = c.v[k];
        break;
      }
  }
  if (lead < 0.0) {
    c.u = -c.u;
    c.v = -c.v;
  }
  Eigen::AngleAxisd aa(to_eigen(c));
  return aa.axis() * (aa.angle() / 2.0);
}

inline radarloc::pose::Quaternion quat_exp_ref(const Eigen::Vector3d& w) {
  const double n = w.norm();
  if (n == 0.0) return {1.0, Eigen::Vector3d::Zero()};
  Eigen::AngleAxisd aa(2.0 * n, w / n);
  Eigen::Quaterniond e(aa);
  return from_eigen(e.normalized());
}

inline radarloc::pose::Quaternion quat_mul_ref(
    const radarloc::pose::Quaternion& a, const radarloc::pose::Quaternion& b) {
  return from_eigen(to_eigen(a) * to_eigen(b));
}

inline Eigen::Vector3d rotate_ref(const radarloc::pose::Quaternion& q,
                                  const Eigen::Vector3d& x) {
  return to_eigen(q) * x;
}

inline radarloc::pose::Quaternion random_unit_quat(Rng& rng) {
  radarloc::pose::Quaternion q;
  do {
    q.u = rng.normal();
    q.v = {rng.normal(), rng.normal(), rng.normal()};
  } while (q.norm() < 1e-6);
  const double n = q.norm();
  q.u /= n;
  q.v /= n;
  return q;
}

inline radarloc::pose::Quaternion canonical(radarloc::pose::Quaternion q) {
  double lead = q.u;
  if (lead == 0.0)
    for (int k = 0; k < 3 && lead == 0.0; ++k) lead = q.v[k];
  if (lead < 0.0) {
    q.u = -q.u;
    q.v = -q.v;
  }
  return q;
}

inline radarloc::pose::Pose random_pose(Rng& rng, double extent = 10.0) {
  radarloc::pose::Pose p;
  p.p = {rng.uniform(-extent, extent), rng.uniform(-extent, extent),
         rng.uniform(-extent, extent)};
  p.q = canonical(random_unit_quat(rng));
  return p;
}

// --- finite differences ------------------------------------------------------

// central difference d(scalar_fn)/d(store value at [pid][idx])
inline double central_diff(radarloc::ad::ParamStore& store, int pid,
                           std::size_t idx, const std::function<double()>& fn,
                           double h = 1e-5) {
  double& x = store.value(pid)[idx];
  const double x0 = x;
  x = x0 + h;
  const double fp = fn();
  x = x0 - h;
  const double fm = fn();
  x = x0;
  return (fp - fm) / (2.0 * h);
}

inline double rel_err(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / denom;
}

inline Tensor random_tensor(const std::vector<int>& shape, Rng& rng,
                            double scale = 1.0) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.normal();
  return t;
}

}  // namespace oracles
