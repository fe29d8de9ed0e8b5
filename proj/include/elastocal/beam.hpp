#pragma once

#include <Eigen/Core>

#include "elastocal/pose.hpp"

namespace elastocal {

using Matrix12 = Eigen::Matrix<double, 12, 12>;

/// Euler-Bernoulli beam section and length. N, mm.
struct BeamProperties {
  double E = 0.0;   // Young's modulus, N/mm^2
  double G = 0.0;   // shear modulus, N/mm^2
  double S = 0.0;   // cross-section area, mm^2
  double L = 0.0;   // length, mm
  double Iy = 0.0;  // second moment about local y, mm^4
  double Iz = 0.0;  // second moment about local z, mm^4
  double J = 0.0;   // torsion constant, mm^4

  /// Throws std::invalid_argument unless every field is finite and positive.
  void validate() const;
  BeamProperties with_length(double length) const {
    BeamProperties p = *this;
    p.L = length;
    return p;
  }
};

/// Cantilever stiffness of the free end (node 2) with node 1 clamped, in the
/// beam frame (x along the beam). Twist order (dp; dphi), wrench (f; m).
Matrix6 beam_stiffness_local(const BeamProperties& p);

/// Beam frame for a link from `start` along `direction`: x along the link,
/// y from the reference frame's y (or z when y is nearly axial), projected.
Matrix3 beam_frame(const Matrix3& reference, const Vector3& direction);

/// blockdiag(R, R, R, R) K blockdiag(R, R, R, R)^T. Throws std::invalid_argument
/// when R is not orthonormal.
Matrix12 to_global(const Matrix12& k_local, const Matrix3& r);

/// Two-node beam element. Node 1 sits at `frame.translation`, node 2 at
/// L along the frame x axis. Returned blocks are global.
struct BeamElement {
  Matrix12 k;  // [K11 K12; K21 K22]
  Vector3 node1;
  Vector3 node2;
};

BeamElement link_block(const BeamProperties& p, const Pose& frame);

}  // namespace elastocal
