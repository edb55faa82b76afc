#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>

#include "splatalign/errors.hpp"

namespace splatalign {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

// Tangent of Sim(3), ordered (rho, omega, lambda): translational part,
// rotational part in radians, log-scale.
template <typename Scalar>
using Tangent7 = Eigen::Matrix<Scalar, 7, 1>;
using Tangent7d = Tangent7<double>;

template <typename Derived>
auto rho(const Eigen::MatrixBase<Derived>& xi) {
  return xi.template segment<3>(0);
}
template <typename Derived>
auto omega(const Eigen::MatrixBase<Derived>& xi) {
  return xi.template segment<3>(3);
}
template <typename Derived>
auto lambda(const Eigen::MatrixBase<Derived>& xi) {
  return xi(6);
}

template <typename Scalar>
Matrix3<Scalar> hat(const Vector3<Scalar>& v) {
  Matrix3<Scalar> m;
  // clang-format off
  m << Scalar(0), -v.z(),      v.y(),
       v.z(),      Scalar(0), -v.x(),
      -v.y(),      v.x(),      Scalar(0);
  // clang-format on
  return m;
}

template <typename Scalar>
Vector3<Scalar> vee(const Matrix3<Scalar>& m) {
  return Vector3<Scalar>(m(2, 1), m(0, 2), m(1, 0));
}

/// Similarity transform acting as p' = s * (R p + t), s = exp(log_scale).
///
/// The scale is applied after the rigid motion, so the rigid block matches
/// the usual SE(3) exponential and the log-scale only stretches radially.
template <typename Scalar>
struct Sim3 {
  Matrix3<Scalar> rotation = Matrix3<Scalar>::Identity();
  Vector3<Scalar> translation = Vector3<Scalar>::Zero();
  Scalar log_scale = Scalar(0);

  static Sim3 identity() { return Sim3{}; }

  Scalar scale() const {
    using std::exp;
    return exp(log_scale);
  }

  Vector3<Scalar> operator*(const Vector3<Scalar>& p) const {
    return scale() * (rotation * p + translation);
  }

  template <typename Other>
  Sim3<Other> cast() const {
    return Sim3<Other>{rotation.template cast<Other>(),
                       translation.template cast<Other>(), Other(log_scale)};
  }
};

using Sim3d = Sim3<double>;

namespace detail {

// Coefficients of the SO(3)/SE(3) exponential as series in theta^2 near 0:
// a = sin(t)/t, b = (1 - cos(t))/t^2, c = (t - sin(t))/t^3.
template <typename Scalar>
void exp_coefficients(const Scalar& theta_sq, Scalar& a, Scalar& b,
                      Scalar& c) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  if (theta_sq < Scalar(1e-6)) {
    const Scalar t2 = theta_sq;
    const Scalar t4 = t2 * t2;
    a = Scalar(1) - t2 / Scalar(6) + t4 / Scalar(120);
    b = Scalar(0.5) - t2 / Scalar(24) + t4 / Scalar(720);
    c = Scalar(1) / Scalar(6) - t2 / Scalar(120) + t4 / Scalar(5040);
    return;
  }
  const Scalar theta = sqrt(theta_sq);
  const Scalar s = sin(theta);
  const Scalar co = cos(theta);
  a = s / theta;
  b = (Scalar(1) - co) / theta_sq;
  c = (theta - s) / (theta_sq * theta);
}

}  // namespace detail

template <typename Scalar>
Matrix3<Scalar> exp_so3(const Vector3<Scalar>& w) {
  Scalar a, b, c;
  detail::exp_coefficients<Scalar>(w.squaredNorm(), a, b, c);
  const Matrix3<Scalar> W = hat(w);
  return Matrix3<Scalar>::Identity() + a * W + b * W * W;
}

/// Inverse of exp_so3. Throws RotationNearPi once trace(R) <= -1 + 1e-7.
template <typename Scalar>
Vector3<Scalar> log_so3(const Matrix3<Scalar>& R) {
  using std::atan2;
  const Scalar tr = R.trace();
  if (tr <= Scalar(-1) + Scalar(1e-7)) throw RotationNearPi();
  const Vector3<Scalar> v = vee<Scalar>(R - R.transpose()) / Scalar(2);
  const Scalar sin_theta = v.norm();
  const Scalar cos_theta = (tr - Scalar(1)) / Scalar(2);
  const Scalar theta = atan2(sin_theta, cos_theta);
  const Scalar theta_sq = theta * theta;
  Scalar factor;
  if (theta_sq < Scalar(1e-6)) {
    factor = Scalar(1) + theta_sq / Scalar(6) + Scalar(7) * theta_sq * theta_sq / Scalar(360);
  } else {
    factor = theta / sin_theta;
  }
  return factor * v;
}

template <typename Scalar>
Matrix3<Scalar> se3_left_jacobian(const Vector3<Scalar>& w) {
  Scalar a, b, c;
  detail::exp_coefficients<Scalar>(w.squaredNorm(), a, b, c);
  const Matrix3<Scalar> W = hat(w);
  return Matrix3<Scalar>::Identity() + b * W + c * W * W;
}

template <typename Scalar>
Sim3<Scalar> exp_sim3(const Tangent7<Scalar>& xi) {
  const Vector3<Scalar> w = omega(xi);
  const Vector3<Scalar> r = rho(xi);
  Sim3<Scalar> out;
  out.rotation = exp_so3<Scalar>(w);
  out.translation = se3_left_jacobian<Scalar>(w) * r;
  out.log_scale = lambda(xi);
  return out;
}

template <typename Scalar>
Tangent7<Scalar> log_sim3(const Sim3<Scalar>& T) {
  const Vector3<Scalar> w = log_so3<Scalar>(T.rotation);
  Tangent7<Scalar> xi;
  xi.template segment<3>(0) =
      se3_left_jacobian<Scalar>(w).partialPivLu().solve(T.translation);
  xi.template segment<3>(3) = w;
  xi(6) = T.log_scale;
  return xi;
}

/// compose(a, b) applies b first: (a*b)(p) = a(b(p)).
template <typename Scalar>
Sim3<Scalar> compose(const Sim3<Scalar>& a, const Sim3<Scalar>& b) {
  using std::exp;
  Sim3<Scalar> out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation * exp(-b.log_scale);
  out.log_scale = a.log_scale + b.log_scale;
  return out;
}

template <typename Scalar>
Sim3<Scalar> operator*(const Sim3<Scalar>& a, const Sim3<Scalar>& b) {
  return compose(a, b);
}

template <typename Scalar>
Sim3<Scalar> inverse(const Sim3<Scalar>& T) {
  Sim3<Scalar> out;
  out.rotation = T.rotation.transpose();
  out.translation = -T.scale() * (out.rotation * T.translation);
  out.log_scale = -T.log_scale;
  return out;
}

/// Angle in degrees of the relative rotation Ra^T Rb, in [0, 180].
template <typename Scalar>
Scalar geodesic_angle_deg(const Matrix3<Scalar>& Ra, const Matrix3<Scalar>& Rb) {
  using std::acos;
  const Scalar c = ((Ra.transpose() * Rb).trace() - Scalar(1)) / Scalar(2);
  const Scalar clamped = std::clamp(c, Scalar(-1), Scalar(1));
  return acos(clamped) * Scalar(180) / Scalar(M_PI);
}

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
};

inline constexpr double kDefaultNearPlane = 0.7;

/// Pinhole camera; pose maps world points into the camera frame,
/// x_cam = rotation * x_world + translation.
struct Camera {
  Intrinsics intrinsics;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double near_plane = kDefaultNearPlane;

  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }

  Eigen::Vector3d to_camera(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }

  Eigen::Vector2d project(const Eigen::Vector3d& p) const {
    const Eigen::Vector3d x = to_camera(p);
    return {intrinsics.fx * x.x() / x.z() + intrinsics.cx,
            intrinsics.fy * x.y() / x.z() + intrinsics.cy};
  }

  bool valid() const {
    return intrinsics.fx > 0 && intrinsics.fy > 0 && near_plane > 0 &&
           intrinsics.width > 0 && intrinsics.height > 0;
  }
};

/// Re-expresses a camera posed in the source frame of T in T's target
/// frame: the center moves to T(C) and viewing directions rotate by R_T.
/// Intrinsics are untouched.
inline Camera transform_camera(const Sim3d& T, const Camera& cam) {
  Camera out = cam;
  const Eigen::Vector3d c = T * cam.center();
  out.rotation = cam.rotation * T.rotation.transpose();
  out.translation = -out.rotation * c;
  return out;
}

/// Camera looking from `eye` at `target` with world `up`; +z forward,
/// +y down in the image (OpenCV/COLMAP convention).
Camera look_at(const Intrinsics& intrinsics, const Eigen::Vector3d& eye,
               const Eigen::Vector3d& target, const Eigen::Vector3d& up,
               double near_plane = kDefaultNearPlane);

Eigen::Matrix3d quaternion_to_rotation(const Eigen::Vector4d& wxyz);
Eigen::Vector4d rotation_to_quaternion(const Eigen::Matrix3d& R);

}  // namespace splatalign
