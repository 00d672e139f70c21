// Rigid-flow oracles: discrete two-frame reprojection and the first-order
// (instantaneous) motion field.

#ifndef FLOWSEEK_GEOMETRY_HPP
#define FLOWSEEK_GEOMETRY_HPP

#include "flowseek/bases.hpp"
#include "flowseek/parallel.hpp"

namespace flowseek {

/// Points whose transformed depth falls at or below this value are invalid.
inline constexpr double kMinDepth = 1e-6;

/// Flow induced on frame 0 pixels by moving every scene point with `motion`.
/// Zero inverse depth is a point at infinity (translation has no effect).
template <typename Scalar>
FlowField<Scalar> reprojection_flow(const InverseDepthMap<Scalar>& depth,
                                    const CameraIntrinsics<Scalar>& intr,
                                    const RigidMotion<Scalar>& motion) {
  intr.validate();
  depth.validate();
  const int h = depth.height();
  const int w = depth.width();
  FlowField<Scalar> flow(h, w);
  const auto& R = motion.rotation;
  const auto& t = motion.translation;
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

  parallel_rows(h, [&](int i) {
    for (int j = 0; j < w; ++j) {
      const Scalar d = depth.d0(i, j);
      const Scalar ub = Scalar(j) - intr.cx;
      const Scalar vb = Scalar(i) - intr.cy;
      // Work with the point scaled by its inverse depth (the viewing ray) so
      // pure rotations never touch d.
      const Vector3 ray(ub / intr.fx, vb / intr.fy, Scalar(1));
      const Vector3 moved = R * ray + d * t;
      if (moved.z() <= Scalar(kMinDepth) * d || moved.z() <= Scalar(0)) {
        flow.valid(i, j) = false;
        continue;
      }
      flow.u(i, j) = intr.fx * (moved.x() / moved.z() - ray.x());
      flow.v(i, j) = intr.fy * (moved.y() / moved.z() - ray.y());
    }
  });
  return flow;
}

/// Linear combination of the six bases with coefficients
/// (tx, ty, tz, rx, ry, rz). All pixels valid.
template <typename Scalar>
FlowField<Scalar> instantaneous_flow(const InverseDepthMap<Scalar>& depth,
                                     const CameraIntrinsics<Scalar>& intr,
                                     const VelocityMotion<Scalar>& vel) {
  const auto bases = build_six_bases(depth, intr);
  const auto c = vel.coefficients();
  FlowField<Scalar> flow(depth.height(), depth.width());
  for (int k = 0; k < 6; ++k) {
    flow.u += c[k] * bases[k].u;
    flow.v += c[k] * bases[k].v;
  }
  return flow;
}

/// Finite rigid motion whose first-order flow is `scale * instantaneous_flow(vel)`.
///
/// The basis sign convention corresponds to the point rotation vector
/// (-rx, ry, -rz) in the x-right, y-down camera frame; translation maps
/// directly.
template <typename Scalar>
RigidMotion<Scalar> exp_velocity(const VelocityMotion<Scalar>& vel, Scalar scale) {
  Eigen::Matrix<Scalar, 3, 1> omega(-vel.angular.x(), vel.angular.y(), -vel.angular.z());
  return RigidMotion<Scalar>::FromAxisAngle(scale * omega, scale * vel.linear);
}

}  // namespace flowseek

#endif  // FLOWSEEK_GEOMETRY_HPP
