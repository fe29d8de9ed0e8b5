#pragma once

#include <vector>

#include <Eigen/Core>

#include "elastocal/chain.hpp"
#include "elastocal/pose.hpp"

namespace elastocal {

/// Argument of an element for joint vector `q` (rad) and deviations `pi`.
/// Throws ModelError when a parameter id is not present in `pi`.
double element_argument(const ElementaryTransform& e, const Eigen::VectorXd& q, const ParamVector& pi);

/// Composes base, robot elements and each tool block. Returns one pose per
/// reference point (the flange pose when the chain has no tool blocks).
std::vector<Pose> forward_kinematics(const ChainSpec& chain, const Eigen::VectorXd& q, const ParamVector& pi);

/// Flange pose: base and robot elements only.
Pose flange_pose(const ChainSpec& chain, const Eigen::VectorXd& q, const ParamVector& pi);

/// Pose of the robot part only (no base, no tools).
Pose robot_pose(const ChainSpec& chain, const Eigen::VectorXd& q, const ParamVector& pi);

/// d(reference positions)/d(deviations): rows are the stacked xyz of every
/// reference point, columns follow the order of `pi`.
Eigen::MatrixXd jacobian_params(const ChainSpec& chain, const Eigen::VectorXd& q, const ParamVector& pi);

/// Twist Jacobian (dp; dphi, base frame) of reference point `tool` with
/// respect to the joint coordinates.
Eigen::MatrixXd jacobian_joints(const ChainSpec& chain, const Eigen::VectorXd& q, const ParamVector& pi,
                                std::size_t tool = 0);

/// Stacked positions of every reference point (3 * reference_count).
Eigen::VectorXd reference_positions(const ChainSpec& chain, const Eigen::VectorXd& q, const ParamVector& pi);

}  // namespace elastocal
