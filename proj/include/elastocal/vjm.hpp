#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "elastocal/beam.hpp"
#include "elastocal/chain.hpp"

namespace elastocal {

/// 6-dof link spring. Either beam properties (the beam runs from the joint in
/// front of the link to the link end and is re-oriented at every pose) or a
/// fixed 6x6 stiffness in the spring frame.
struct LinkSpring {
  std::optional<BeamProperties> beam;
  Matrix6 matrix = Matrix6::Zero();
};

/// Spring data for a chain: one scalar per joint (N mm/rad), one LinkSpring
/// per link between consecutive joints, optionally one for the segment from
/// the last joint to the first reference point.
struct SpringSet {
  std::vector<double> joints;
  std::vector<LinkSpring> links;
  std::optional<LinkSpring> tool;
};

/// Chain extended with virtual springs. Spring coordinates are ordered along
/// the chain: a 1-dof spring right after every joint, a 6-dof spring
/// (Tx Ty Tz Rx Ry Rz in its local frame) at the end of every link, and the
/// tool spring last.
struct VjmModel {
  ChainSpec chain;
  SpringSet springs;

  std::size_t theta_count() const;
};

/// Checks counts and positivity. Throws std::invalid_argument.
VjmModel build_vjm(const ChainSpec& chain, const SpringSet& springs);

struct SpringJacobians {
  Eigen::MatrixXd theta;    // 6 x n_theta, twist (dp; dphi) of the reference point
  Eigen::MatrixXd q;        // 6 x n_joints
  Eigen::MatrixXd k_theta;  // n_theta x n_theta, block diagonal
  std::vector<int> blocks;  // sizes of the diagonal blocks of k_theta, in order
};

/// Jacobians at the unloaded state (all spring coordinates zero), for the
/// first reference point, in the base frame.
SpringJacobians spring_jacobians(const VjmModel& model, const Eigen::VectorXd& q, const ParamVector& pi);

struct VjmStiffness {
  Matrix6 stiffness;           // K_C (equals K_C0 when no joint is passive)
  Matrix6 locked;              // K_C0 = (J_theta K_theta^-1 J_theta^T)^-1
  Matrix6 compliance;          // (J_theta K_theta^-1 J_theta^T)
  Eigen::MatrixXd deflection;  // n_theta x 6: spring deflections per unit twist, K_theta^-1 J_theta^T K_C
};

/// Cartesian stiffness at the first reference point. `passive_joints` lists
/// 1-based joints that are free to move; empty means every actuated joint is
/// locked. Throws SingularConfigurationError when the compliance or the
/// passive-joint projection is singular.
VjmStiffness cartesian_stiffness_vjm(const VjmModel& model, const Eigen::VectorXd& q, const ParamVector& pi,
                                     const std::vector<int>& passive_joints = {});

/// Reference frames of the stiffness model at a pose: joint origins (frame in
/// front of each joint element, rotation after the joint), link ends and
/// the first reference point.
struct SerialFrames {
  std::vector<Pose> joint;     // frame right after each joint rotation
  std::vector<Pose> link_end;  // frame in front of joints 2..n
  Pose tool;
};

SerialFrames serial_frames(const ChainSpec& chain, const Eigen::VectorXd& q, const ParamVector& pi);

/// Beam frame of link j (0-based) or of the tool segment (j == n-1).
Pose link_beam_frame(const SerialFrames& f, std::size_t link);

}  // namespace elastocal
