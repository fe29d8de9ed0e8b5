#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "elastocal/beam.hpp"
#include "elastocal/pose.hpp"

namespace elastocal {

/// Node of an MSA model. Every node carries a 6-dof displacement (dp; dphi)
/// in the global frame; its frame orients joint selectors and beam sections.
struct MsaNode {
  int id = 0;
  Pose frame;
};

/// Beam from node1 to node2; its local x runs between the node positions and
/// its section is oriented from node1's frame. L must equal the node distance.
struct MsaBeam {
  int node1 = 0;
  int node2 = 0;
  BeamProperties props;
};

/// One-axis elastic joint between two coincident nodes; axis is a label of
/// node_i's frame.
struct MsaJoint {
  int node_i = 0;
  int node_j = 0;
  char axis = 'z';
  double stiffness = 0.0;
};

/// Connection of one node to the fixed ground: elastic about one axis, or
/// clamped when `axis` is empty.
struct MsaSupport {
  int node = 0;
  std::optional<char> axis;
  double stiffness = 0.0;
};

struct MsaModel {
  std::vector<MsaNode> nodes;
  std::vector<MsaBeam> beams;
  std::vector<MsaJoint> joints;
  MsaSupport support;
  int external = 0;
  /// Rigid offset (global) from the external node to the point where the
  /// stiffness is reported.
  Vector3 tool_offset = Vector3::Zero();
};

/// Selectors of a joint in global twist coordinates: rigid rows (5x6) carry
/// zero relative motion, the elastic row is the spring direction.
struct JointSelectors {
  Eigen::Matrix<double, 5, 6> rigid;
  Eigen::Matrix<double, 1, 6> elastic;
};

/// Selectors for an elastic rotation about `axis` of a node frame with rotation r.
JointSelectors joint_selectors(char axis, const Matrix3& r);

/// Square linear system of the aggregated model, partitioned so that the
/// last 6 unknowns are the external-node twist and the last 6 rows carry the
/// external wrench: [A B; C D] [mu; dt_e] = [0; W_e].
struct AggregatedSystem {
  Eigen::MatrixXd matrix;
  Eigen::MatrixXd A, B, C, D;

  // Row groups, in order.
  Eigen::Index element_rows = 0;   // -W + K dt = 0 per beam end
  Eigen::Index rigid_rows = 0;     // lambda_r (dt_i - dt_j) = 0
  Eigen::Index balance_rows = 0;   // W_i + W_j = 0, free ends W = 0
  Eigen::Index elastic_rows = 0;   // lambda_e W_i + k lambda_e (dt_i - dt_j) = 0
  Eigen::Index external_rows = 0;  // W at the external node = W_e

  Eigen::Index wrench_unknowns = 0;
  Eigen::Index displacement_unknowns = 0;
  std::vector<int> displacement_nodes;  // node id per 6-block of displacements, external last
  Vector3 tool_offset = Vector3::Zero();
};

/// Builds the aggregated system. Constraint rows are emitted as support first,
/// then joints by node_i, then the external node. Throws ModelError for
/// unknown node ids, beam length mismatch, nodes shared by several beams or
/// joints, and floating substructures.
AggregatedSystem assemble(const MsaModel& model);

/// Schur complement D - C A^-1 B, transported to the tool point. Throws
/// SingularConfigurationError when A is singular.
Matrix6 cartesian_stiffness_msa(const AggregatedSystem& system);

/// Full solution (wrenches, then displacements, external twist last) for an
/// external wrench applied at the external node.
Eigen::VectorXd solve_msa(const AggregatedSystem& system, const Vector6& external_wrench);

}  // namespace elastocal
