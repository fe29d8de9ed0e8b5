#include "elastocal/pose.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace elastocal {

std::string_view to_string(TransformKind k) {
  switch (k) {
    case TransformKind::Tx: return "Tx";
    case TransformKind::Ty: return "Ty";
    case TransformKind::Tz: return "Tz";
    case TransformKind::Rx: return "Rx";
    case TransformKind::Ry: return "Ry";
    case TransformKind::Rz: return "Rz";
  }
  return "?";
}

TransformKind transform_kind_from_string(std::string_view s) {
  if (s == "Tx") return TransformKind::Tx;
  if (s == "Ty") return TransformKind::Ty;
  if (s == "Tz") return TransformKind::Tz;
  if (s == "Rx") return TransformKind::Rx;
  if (s == "Ry") return TransformKind::Ry;
  if (s == "Rz") return TransformKind::Rz;
  throw std::invalid_argument("unknown transform kind '" + std::string(s) + "'");
}

Pose elementary(TransformKind kind, double value) {
  if (!std::isfinite(value)) {
    throw std::invalid_argument("elementary transform " + std::string(to_string(kind)) +
                                " with non-finite value");
  }
  Pose p;
  const int ax = axis_index(kind);
  if (!is_rotation(kind)) {
    p.translation[ax] = value;
    return p;
  }
  const double c = std::cos(value);
  const double s = std::sin(value);
  const int i = (ax + 1) % 3;
  const int j = (ax + 2) % 3;
  p.rotation(i, i) = c;
  p.rotation(i, j) = -s;
  p.rotation(j, i) = s;
  p.rotation(j, j) = c;
  return p;
}

double orthonormality_error(const Matrix3& r) {
  return (r.transpose() * r - Matrix3::Identity()).cwiseAbs().maxCoeff();
}

Matrix3 orthonormalize(const Matrix3& r) {
  Eigen::JacobiSVD<Matrix3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3 out = svd.matrixU() * svd.matrixV().transpose();
  if (out.determinant() < 0.0) {
    Matrix3 u = svd.matrixU();
    u.col(2) *= -1.0;
    out = u * svd.matrixV().transpose();
  }
  return out;
}

Matrix3 exp_so3(const Vector3& w) {
  const double angle = w.norm();
  if (angle < 1e-300) return Matrix3::Identity();
  return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

Matrix6 rotate6(const Matrix3& r) {
  Matrix6 m = Matrix6::Zero();
  m.topLeftCorner<3, 3>() = r;
  m.bottomRightCorner<3, 3>() = r;
  return m;
}

Matrix6 twist_transport(const Vector3& from_a_to_b) {
  Matrix6 m = Matrix6::Identity();
  // dphi x d = -d x dphi
  m.topRightCorner<3, 3>() = -skew(from_a_to_b);
  return m;
}

}  // namespace elastocal
