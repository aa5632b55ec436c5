#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <array>
#include <cmath>
#include <span>

#include "decktrack/error.hpp"

namespace decktrack {

template <class S>
using Vector2 = Eigen::Matrix<S, 2, 1>;
template <class S>
using Vector3 = Eigen::Matrix<S, 3, 1>;
template <class S>
using Matrix3 = Eigen::Matrix<S, 3, 3>;

using Eigen::Vector2d;
using Eigen::Vector3d;
using Eigen::Matrix3d;

/// Pinhole camera parameters in pixels. fx, fy must be positive.
template <class S>
struct CameraIntrinsics {
  S fx;
  S fy;
  S cx;
  S cy;

  Matrix3<S> matrix() const {
    Matrix3<S> k;
    k << fx, S(0), cx, S(0), fy, cy, S(0), S(0), S(1);
    return k;
  }

  bool valid() const {
    return fx > S(0) && fy > S(0) && std::isfinite(fx) && std::isfinite(fy) &&
           std::isfinite(cx) && std::isfinite(cy);
  }
};

using Intrinsicsd = CameraIntrinsics<double>;

template <class Derived>
Matrix3<typename Derived::Scalar> skew(const Eigen::MatrixBase<Derived>& v) {
  using S = typename Derived::Scalar;
  Matrix3<S> m;
  m << S(0), -v.z(), v.y(), v.z(), S(0), -v.x(), -v.y(), v.x(), S(0);
  return m;
}

template <class S>
bool is_rotation_matrix(const Matrix3<S>& r, S tol = S(1e-9)) {
  const S ortho = (r.transpose() * r - Matrix3<S>::Identity()).norm();
  return ortho < tol && std::abs(r.determinant() - S(1)) < tol;
}

/// Rotation matrix for a Rodrigues vector (axis * angle, radians).
/// A zero vector yields the identity.
template <class S>
Matrix3<S> rodrigues_to_rotation(const Vector3<S>& rvec) {
  const S angle = rvec.norm();
  if (angle == S(0)) return Matrix3<S>::Identity();
  return Eigen::AngleAxis<S>(angle, rvec / angle).toRotationMatrix();
}

/// Rodrigues vector of a rotation matrix, angle in [0, pi].
/// At angle pi the axis sign is ambiguous; the convention here is that the
/// first component of the axis whose magnitude exceeds 1e-12 is positive.
template <class S>
Vector3<S> rotation_to_rodrigues(const Matrix3<S>& r) {
  Eigen::AngleAxis<S> aa(r);
  Vector3<S> axis = aa.axis();
  S angle = aa.angle();
  if (angle > S(M_PI)) {  // Eigen keeps angle within [0, pi]; guard anyway
    angle = S(2) * S(M_PI) - angle;
    axis = -axis;
  }
  if (std::abs(angle - S(M_PI)) < S(1e-9)) {
    for (int i = 0; i < 3; ++i) {
      if (std::abs(axis[i]) > S(1e-12)) {
        if (axis[i] < S(0)) axis = -axis;
        break;
      }
    }
  }
  return axis * angle;
}

/// Rigid transform: x_out = rotation * x_in + translation.
template <class S>
struct Pose {
  Matrix3<S> rotation = Matrix3<S>::Identity();
  Vector3<S> translation = Vector3<S>::Zero();

  Pose() = default;
  Pose(const Matrix3<S>& r, const Vector3<S>& t) : rotation(r), translation(t) {}

  static Pose from_rodrigues(const Vector3<S>& rvec, const Vector3<S>& t) {
    return Pose(rodrigues_to_rotation(rvec), t);
  }

  Vector3<S> operator*(const Vector3<S>& p) const { return rotation * p + translation; }

  Pose operator*(const Pose& other) const {
    return Pose(rotation * other.rotation, rotation * other.translation + translation);
  }

  Pose inverse() const {
    return Pose(rotation.transpose(), -(rotation.transpose() * translation));
  }
};

using Posed = Pose<double>;

/// Canonical square tag model: four coplanar corners in the Y = 0 plane,
/// centered on the origin, side length s. The corner order is the
/// registry-wide convention and every consumer relies on it.
template <class S>
std::array<Vector3<S>, 4> canonical_tag_corners(S side) {
  const S h = side / S(2);
  return {Vector3<S>(-h, S(0), -h), Vector3<S>(h, S(0), -h), Vector3<S>(h, S(0), h),
          Vector3<S>(-h, S(0), h)};
}

template <class S>
Vector3<S> transform_model_to_world(const Pose<S>& pose, const Vector3<S>& p) {
  return pose * p;
}

/// Perspective projection of a camera-frame point with Z > 0.
template <class S>
Vector2<S> project_point(const CameraIntrinsics<S>& k, const Vector3<S>& w) {
  if (!(w.z() > S(0))) {
    raise(Errc::non_positive_depth, "cannot project point with Z <= 0");
  }
  return Vector2<S>(k.fx * w.x() / w.z() + k.cx, k.fy * w.y() / w.z() + k.cy);
}

/// Root-mean-square pixel distance between projected model points and
/// observations. Lengths must match and every transformed point needs Z > 0.
template <class S>
S reprojection_error(const CameraIntrinsics<S>& k, const Pose<S>& pose,
                     std::span<const Vector3<S>> model_pts,
                     std::span<const Vector2<S>> observed) {
  if (model_pts.size() != observed.size() || model_pts.empty()) {
    raise(Errc::length_mismatch, "model/observation count mismatch");
  }
  S sum = S(0);
  for (std::size_t i = 0; i < model_pts.size(); ++i) {
    const Vector2<S> p = project_point(k, pose * model_pts[i]);
    sum += (p - observed[i]).squaredNorm();
  }
  return std::sqrt(sum / static_cast<S>(model_pts.size()));
}

/// Rotation angle of R, in [0, pi]. Extracted through the quaternion so it
/// stays accurate for small angles.
template <class S>
S rotation_angle(const Matrix3<S>& r) {
  Eigen::Quaternion<S> q(r);
  return S(2) * std::atan2(q.vec().norm(), std::abs(q.w()));
}

/// Geodesic distance between two rotations.
template <class S>
S rotation_distance(const Matrix3<S>& a, const Matrix3<S>& b) {
  return rotation_angle<S>(Matrix3<S>(a.transpose() * b));
}

}  // namespace decktrack
