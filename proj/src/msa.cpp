#include "elastocal/msa.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <string>

#include <Eigen/Dense>

#include "elastocal/errors.hpp"
#include "elastocal/linalg.hpp"

namespace elastocal {

JointSelectors joint_selectors(char axis, const Matrix3& r) {
  if (axis != 'x' && axis != 'y' && axis != 'z') {
    throw ModelError(std::string("invalid joint axis '") + axis + "'");
  }
  const int elastic = 3 + (axis - 'x');
  Eigen::Matrix<double, 6, 6> local = Eigen::Matrix<double, 6, 6>::Identity();
  JointSelectors s;
  int row = 0;
  for (int k = 0; k < 6; ++k) {
    if (k == elastic) continue;
    s.rigid.row(row++) = local.row(k);
  }
  s.elastic = local.row(elastic);
  // Global twist to node-frame twist.
  const Matrix6 to_local = rotate6(r.transpose());
  s.rigid = s.rigid * to_local;
  s.elastic = s.elastic * to_local;
  return s;
}

namespace {

struct Layout {
  std::map<int, std::size_t> node_index;    // id -> position in model.nodes
  std::map<int, Eigen::Index> disp_col;     // id -> first displacement column
  std::map<int, Eigen::Index> wrench_col;   // id -> first wrench column of the beam end at that node
};

void check_nodes(const MsaModel& m, Layout& l) {
  for (std::size_t i = 0; i < m.nodes.size(); ++i) {
    if (!l.node_index.emplace(m.nodes[i].id, i).second) {
      throw ModelError("duplicate node id " + std::to_string(m.nodes[i].id));
    }
  }
  auto require = [&](int id, const std::string& where) {
    if (!l.node_index.count(id)) throw ModelError(where + " references unknown node " + std::to_string(id));
  };
  for (std::size_t b = 0; b < m.beams.size(); ++b) {
    require(m.beams[b].node1, "beam " + std::to_string(b));
    require(m.beams[b].node2, "beam " + std::to_string(b));
  }
  for (std::size_t j = 0; j < m.joints.size(); ++j) {
    require(m.joints[j].node_i, "joint " + std::to_string(j));
    require(m.joints[j].node_j, "joint " + std::to_string(j));
  }
  require(m.support.node, "support");
  require(m.external, "external node");
}

/// Nodes not connected to the support through beams and joints.
std::vector<int> floating_nodes(const MsaModel& m) {
  std::map<int, std::vector<int>> adj;
  for (const auto& b : m.beams) {
    adj[b.node1].push_back(b.node2);
    adj[b.node2].push_back(b.node1);
  }
  for (const auto& j : m.joints) {
    adj[j.node_i].push_back(j.node_j);
    adj[j.node_j].push_back(j.node_i);
  }
  std::set<int> seen{m.support.node};
  std::vector<int> stack{m.support.node};
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int w : adj[v]) {
      if (seen.insert(w).second) stack.push_back(w);
    }
  }
  std::vector<int> out;
  for (const auto& n : m.nodes) {
    if (!seen.count(n.id)) out.push_back(n.id);
  }
  return out;
}

std::string join_ids(const std::vector<int>& ids) {
  std::string s;
  for (int id : ids) s += (s.empty() ? "" : ", ") + std::to_string(id);
  return s;
}

}  // namespace

AggregatedSystem assemble(const MsaModel& model) {
  Layout l;
  check_nodes(model, l);
  if (const auto floating = floating_nodes(model); !floating.empty()) {
    throw ModelError("floating substructure: nodes " + join_ids(floating) + " are not connected to the support");
  }

  // Each node belongs to at most one beam and at most one connection.
  std::map<int, int> beam_of;
  for (std::size_t b = 0; b < model.beams.size(); ++b) {
    for (int id : {model.beams[b].node1, model.beams[b].node2}) {
      if (!beam_of.emplace(id, static_cast<int>(b)).second) {
        throw ModelError("node " + std::to_string(id) + " is an end of more than one beam");
      }
    }
    if (model.beams[b].node1 == model.beams[b].node2) throw ModelError("beam " + std::to_string(b) + " has equal ends");
  }
  std::set<int> connected{model.support.node};
  for (const auto& j : model.joints) {
    for (int id : {j.node_i, j.node_j}) {
      if (!connected.insert(id).second) throw ModelError("node " + std::to_string(id) + " takes part in two connections");
    }
    if (!beam_of.count(j.node_i)) {
      throw ModelError("joint node " + std::to_string(j.node_i) + " must be a beam end");
    }
    if (!beam_of.count(j.node_j) && j.node_j != model.external) {
      throw ModelError("node " + std::to_string(j.node_j) + " has neither a beam nor the external load");
    }
    if (!(j.stiffness > 0.0)) throw ModelError("joint stiffness must be positive");
  }
  if (!beam_of.count(model.support.node)) throw ModelError("support node must be a beam end");
  if (model.support.axis && !(model.support.stiffness > 0.0)) throw ModelError("support stiffness must be positive");

  // Unknown layout: beam-end wrenches in beam order, then node displacements
  // in node order with the external node last.
  Eigen::Index col = 0;
  for (const auto& b : model.beams) {
    l.wrench_col[b.node1] = col;
    l.wrench_col[b.node2] = col + 6;
    col += 12;
  }
  AggregatedSystem sys;
  sys.wrench_unknowns = col;
  for (const auto& n : model.nodes) {
    if (n.id == model.external) continue;
    l.disp_col[n.id] = col;
    sys.displacement_nodes.push_back(n.id);
    col += 6;
  }
  l.disp_col[model.external] = col;
  sys.displacement_nodes.push_back(model.external);
  col += 6;
  sys.displacement_unknowns = col - sys.wrench_unknowns;
  const Eigen::Index n_unknowns = col;

  std::vector<Eigen::RowVectorXd> element, rigid, balance, elastic, external;
  auto zero_row = [&]() { return Eigen::RowVectorXd::Zero(n_unknowns); };
  const auto& frame_of = [&](int id) -> const Pose& { return model.nodes[l.node_index.at(id)].frame; };

  for (std::size_t b = 0; b < model.beams.size(); ++b) {
    const MsaBeam& beam = model.beams[b];
    const Vector3 p1 = frame_of(beam.node1).translation;
    const Vector3 p2 = frame_of(beam.node2).translation;
    const double dist = (p2 - p1).norm();
    if (std::abs(dist - beam.props.L) > 1e-6 * std::max(1.0, dist)) {
      throw ModelError("beam " + std::to_string(b) + ": length " + std::to_string(beam.props.L) +
                       " does not match node distance " + std::to_string(dist));
    }
    const Pose frame{beam_frame(frame_of(beam.node1).rotation, p2 - p1), p1};
    const BeamElement e = link_block(beam.props, frame);
    const int ends[2] = {beam.node1, beam.node2};
    for (int side = 0; side < 2; ++side) {
      for (int r = 0; r < 6; ++r) {
        Eigen::RowVectorXd row = zero_row();
        row[l.wrench_col[ends[side]] + r] = -1.0;
        row.segment<6>(l.disp_col[beam.node1]) = e.k.block<1, 6>(6 * side + r, 0);
        row.segment<6>(l.disp_col[beam.node2]) = e.k.block<1, 6>(6 * side + r, 6);
        element.push_back(row);
      }
    }
  }

  // Support: a joint to the ground, whose displacement is zero.
  {
    const int id = model.support.node;
    if (model.support.axis) {
      const JointSelectors s = joint_selectors(*model.support.axis, frame_of(id).rotation);
      for (int r = 0; r < 5; ++r) {
        Eigen::RowVectorXd row = zero_row();
        row.segment<6>(l.disp_col[id]) = s.rigid.row(r);
        rigid.push_back(row);
      }
      Eigen::RowVectorXd row = zero_row();
      row.segment<6>(l.wrench_col[id]) = s.elastic;
      row.segment<6>(l.disp_col[id]) = model.support.stiffness * s.elastic;
      elastic.push_back(row);
    } else {
      for (int r = 0; r < 6; ++r) {
        Eigen::RowVectorXd row = zero_row();
        row[l.disp_col[id] + r] = 1.0;
        rigid.push_back(row);
      }
    }
  }

  std::vector<MsaJoint> joints = model.joints;
  std::stable_sort(joints.begin(), joints.end(), [](const MsaJoint& a, const MsaJoint& b) { return a.node_i < b.node_i; });
  int external_partner = -1;
  for (const auto& j : joints) {
    const JointSelectors s = joint_selectors(j.axis, frame_of(j.node_i).rotation);
    for (int r = 0; r < 5; ++r) {
      Eigen::RowVectorXd row = zero_row();
      row.segment<6>(l.disp_col[j.node_i]) = s.rigid.row(r);
      row.segment<6>(l.disp_col[j.node_j]) = -s.rigid.row(r);
      rigid.push_back(row);
    }
    if (beam_of.count(j.node_j)) {
      for (int r = 0; r < 6; ++r) {
        Eigen::RowVectorXd row = zero_row();
        row[l.wrench_col[j.node_i] + r] = 1.0;
        row[l.wrench_col[j.node_j] + r] = 1.0;
        balance.push_back(row);
      }
    } else {
      external_partner = j.node_i;
    }
    Eigen::RowVectorXd row = zero_row();
    row.segment<6>(l.wrench_col[j.node_i]) = s.elastic;
    row.segment<6>(l.disp_col[j.node_i]) = j.stiffness * s.elastic;
    row.segment<6>(l.disp_col[j.node_j]) = -j.stiffness * s.elastic;
    elastic.push_back(row);
  }

  // Unloaded beam ends.
  for (const auto& n : model.nodes) {
    if (!beam_of.count(n.id) || connected.count(n.id) || n.id == model.external) continue;
    for (int r = 0; r < 6; ++r) {
      Eigen::RowVectorXd row = zero_row();
      row[l.wrench_col[n.id] + r] = 1.0;
      balance.push_back(row);
    }
  }

  const int loaded = beam_of.count(model.external) ? model.external : external_partner;
  if (loaded < 0) throw ModelError("external node " + std::to_string(model.external) + " is not attached");
  if (beam_of.count(model.external) && connected.count(model.external)) {
    throw ModelError("external node " + std::to_string(model.external) + " may not also be a joint node");
  }
  for (int r = 0; r < 6; ++r) {
    Eigen::RowVectorXd row = zero_row();
    row[l.wrench_col[loaded] + r] = 1.0;
    external.push_back(row);
  }

  sys.element_rows = static_cast<Eigen::Index>(element.size());
  sys.rigid_rows = static_cast<Eigen::Index>(rigid.size());
  sys.balance_rows = static_cast<Eigen::Index>(balance.size());
  sys.elastic_rows = static_cast<Eigen::Index>(elastic.size());
  sys.external_rows = static_cast<Eigen::Index>(external.size());
  const Eigen::Index n_rows = sys.element_rows + sys.rigid_rows + sys.balance_rows + sys.elastic_rows + sys.external_rows;
  if (n_rows != n_unknowns) {
    throw ModelError("aggregated system is not square (" + std::to_string(n_rows) + " rows, " +
                     std::to_string(n_unknowns) + " unknowns)");
  }
  sys.matrix.resize(n_rows, n_unknowns);
  Eigen::Index r = 0;
  for (const auto* group : {&element, &rigid, &balance, &elastic, &external}) {
    for (const auto& row : *group) sys.matrix.row(r++) = row;
  }
  const Eigen::Index m = n_unknowns - 6;
  sys.A = sys.matrix.topLeftCorner(m, m);
  sys.B = sys.matrix.topRightCorner(m, 6);
  sys.C = sys.matrix.bottomLeftCorner(6, m);
  sys.D = sys.matrix.bottomRightCorner(6, 6);
  sys.tool_offset = model.tool_offset;
  return sys;
}

namespace {

Eigen::MatrixXd solve_internal(const AggregatedSystem& s) {
  // Stiffness rows (~1e9) and unit selector rows share the matrix; equilibrate
  // rows and columns so the rank decision is not dominated by the scale.
  const Eigen::Index n = s.A.rows();
  Eigen::VectorXd row_scale(n), col_scale(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = s.A.row(i).cwiseAbs().maxCoeff();
    row_scale[i] = m > 0.0 ? 1.0 / m : 1.0;
  }
  const Eigen::MatrixXd rows_scaled = row_scale.asDiagonal() * s.A;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double m = rows_scaled.col(j).cwiseAbs().maxCoeff();
    col_scale[j] = m > 0.0 ? 1.0 / m : 1.0;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(rows_scaled * col_scale.asDiagonal());
  if (!lu.isInvertible()) {
    const Eigen::MatrixXd ker = col_scale.asDiagonal() * lu.kernel();
    throw SingularConfigurationError("aggregated system is singular at this configuration", ker);
  }
  return col_scale.asDiagonal() * lu.solve(row_scale.asDiagonal() * s.B);
}

Matrix6 node_stiffness(const AggregatedSystem& s, const Eigen::MatrixXd& a_inv_b) {
  Matrix6 k = s.D - s.C * a_inv_b;
  return 0.5 * (k + k.transpose());
}

}  // namespace

Matrix6 cartesian_stiffness_msa(const AggregatedSystem& system) {
  const Matrix6 k = node_stiffness(system, solve_internal(system));
  if (system.tool_offset.isZero(0.0)) return k;
  // Rigid offset: dt_tool = T dt_node, so K_tool = T^-T K T^-1.
  const Matrix6 t_inv = twist_transport(-system.tool_offset);
  const Matrix6 out = t_inv.transpose() * k * t_inv;
  return 0.5 * (out + out.transpose());
}

Eigen::VectorXd solve_msa(const AggregatedSystem& system, const Vector6& external_wrench) {
  const Eigen::MatrixXd a_inv_b = solve_internal(system);
  const Matrix6 k = node_stiffness(system, a_inv_b);
  const Vector6 twist = spd_inverse(k, "external node stiffness") * external_wrench;
  Eigen::VectorXd out(system.matrix.cols());
  out.head(system.A.rows()) = -a_inv_b * twist;
  out.tail<6>() = twist;
  return out;
}

}  // namespace elastocal
