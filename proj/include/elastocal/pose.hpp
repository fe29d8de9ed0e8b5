#pragma once

#include <string_view>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace elastocal {

using Vector3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;
using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

/// Elementary transform kinds. Translations in mm, rotations in rad.
enum class TransformKind { Tx, Ty, Tz, Rx, Ry, Rz };

inline bool is_rotation(TransformKind k) {
  return k == TransformKind::Rx || k == TransformKind::Ry || k == TransformKind::Rz;
}

/// Local unit axis of an elementary transform (0 = x, 1 = y, 2 = z).
inline int axis_index(TransformKind k) { return static_cast<int>(k) % 3; }

std::string_view to_string(TransformKind k);
TransformKind transform_kind_from_string(std::string_view s);

/// Rigid transform: rotation (orthonormal, det +1) and translation in mm.
struct Pose {
  Matrix3 rotation = Matrix3::Identity();
  Vector3 translation = Vector3::Zero();

  static Pose identity() { return {}; }

  Pose operator*(const Pose& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }
  Vector3 apply(const Vector3& p) const { return rotation * p + translation; }
  Pose inverse() const {
    Matrix3 rt = rotation.transpose();
    return {rt, -rt * translation};
  }
  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }
};

/// Translation along / rotation about a principal axis.
/// Throws std::invalid_argument for non-finite values.
Pose elementary(TransformKind kind, double value);

/// Max-abs deviation of R^T R from identity.
double orthonormality_error(const Matrix3& r);

/// Re-projects a nearly orthonormal matrix onto SO(3).
Matrix3 orthonormalize(const Matrix3& r);

inline Matrix3 skew(const Vector3& v) {
  Matrix3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

/// Rotation vector to matrix (Rodrigues).
Matrix3 exp_so3(const Vector3& w);

/// blockdiag(R, R): maps twists (dp, dphi) and wrenches (f, m) between frames
/// with a common origin.
Matrix6 rotate6(const Matrix3& r);

/// Transports a twist given at point a to point b of the same rigid body:
/// dp_b = dp_a + dphi x (b - a). Wrench transport is the transpose.
Matrix6 twist_transport(const Vector3& from_a_to_b);

}  // namespace elastocal
