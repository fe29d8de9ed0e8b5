#include "elastocal/beam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace elastocal {

void BeamProperties::validate() const {
  const std::pair<const char*, double> fields[] = {{"E", E}, {"G", G}, {"S", S}, {"L", L},
                                                   {"Iy", Iy}, {"Iz", Iz}, {"J", J}};
  for (const auto& [name, v] : fields) {
    if (!std::isfinite(v) || v <= 0.0) {
      throw std::invalid_argument(std::string("beam property ") + name + " must be positive, got " + std::to_string(v));
    }
  }
}

Matrix6 beam_stiffness_local(const BeamProperties& p) {
  p.validate();
  const double L = p.L, L2 = L * L, L3 = L2 * L;
  Matrix6 k = Matrix6::Zero();
  k(0, 0) = p.E * p.S / L;
  k(1, 1) = 12 * p.E * p.Iz / L3;
  k(2, 2) = 12 * p.E * p.Iy / L3;
  k(3, 3) = p.G * p.J / L;
  k(4, 4) = 4 * p.E * p.Iy / L;
  k(5, 5) = 4 * p.E * p.Iz / L;
  // Bending couplings. Row 2 is laid out like its symmetric partner (6,2).
  k(1, 5) = k(5, 1) = -6 * p.E * p.Iz / L2;
  k(2, 4) = k(4, 2) = 6 * p.E * p.Iy / L2;
  return k;
}

Matrix3 beam_frame(const Matrix3& reference, const Vector3& direction) {
  const double len = direction.norm();
  if (!(len > 0.0)) throw std::invalid_argument("beam direction has zero length");
  const Vector3 x = direction / len;
  Vector3 y = reference.col(1) - reference.col(1).dot(x) * x;
  if (y.norm() < 1e-6) y = reference.col(2) - reference.col(2).dot(x) * x;
  y.normalize();
  Matrix3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = x.cross(y);
  return r;
}

Matrix12 to_global(const Matrix12& k_local, const Matrix3& r) {
  if (orthonormality_error(r) > 1e-9 || r.determinant() < 0.0) {
    throw std::invalid_argument("to_global: rotation is not orthonormal");
  }
  Matrix12 t = Matrix12::Zero();
  for (int b = 0; b < 4; ++b) t.block<3, 3>(3 * b, 3 * b) = r;
  return t * k_local * t.transpose();
}

BeamElement link_block(const BeamProperties& p, const Pose& frame) {
  const Matrix6 k = beam_stiffness_local(p);

  Matrix6 flip = Matrix6::Zero();  // blockdiag(Rz(pi), Rz(pi))
  const Matrix3 rz_pi = elementary(TransformKind::Rz, M_PI).rotation;
  flip.topLeftCorner<3, 3>() = rz_pi;
  flip.bottomRightCorner<3, 3>() = rz_pi;

  // Lever from node 2 back to node 1, in the beam frame.
  const Matrix3 lever = skew(Vector3(-p.L, 0.0, 0.0));
  Matrix6 lower_t = Matrix6::Identity();
  lower_t.bottomLeftCorner<3, 3>() = lever.transpose();
  Matrix6 lower = Matrix6::Identity();
  lower.bottomLeftCorner<3, 3>() = lever;

  const Matrix6 k22 = k;
  const Matrix6 k11 = flip.transpose() * k * flip;
  const Matrix6 k12 = -lower_t * k22;
  const Matrix6 k21 = -lower * k11;

  Matrix12 local;
  local << k11, k12, k21, k22;
  BeamElement e;
  e.k = to_global(local, frame.rotation);
  e.node1 = frame.translation;
  e.node2 = frame.translation + p.L * frame.rotation.col(0);
  return e;
}

}  // namespace elastocal
