#include "elastocal/kinematics.hpp"

#include <stdexcept>
#include <string>

#include "elastocal/errors.hpp"

namespace elastocal {

double element_argument(const ElementaryTransform& e, const Eigen::VectorXd& q, const ParamVector& pi) {
  if (const auto* c = std::get_if<ConstantBinding>(&e.binding)) return c->value;
  if (const auto* d = std::get_if<DeviationBinding>(&e.binding)) return d->nominal + pi.deviation(d->param);
  const auto& j = std::get<JointBinding>(e.binding);
  if (j.index < 1 || j.index > q.size()) {
    throw ModelError("joint index " + std::to_string(j.index) + " outside the configuration vector");
  }
  double v = q[j.index - 1] + j.home;
  if (j.offset_param) v += pi.deviation(*j.offset_param);
  return v;
}

namespace {

void check_q(const ChainSpec& chain, const Eigen::VectorXd& q) {
  if (static_cast<std::size_t>(q.size()) != chain.joint_count()) {
    throw std::invalid_argument("configuration has " + std::to_string(q.size()) + " entries, chain '" +
                                chain.name + "' has " + std::to_string(chain.joint_count()) + " joints");
  }
}

/// Frame in front of an element plus what drives it.
struct Site {
  Pose before;
  TransformKind kind;
  int param = -1;  // column in pi, -1 if none
  int joint = -1;  // 0-based joint, -1 if none
};

struct Walk {
  std::vector<Site> shared;             // base + robot elements
  std::vector<std::vector<Site>> tools;  // per tool block
  Pose flange;
  std::vector<Pose> ends;
};

int param_column(const ElementaryTransform& e, const ParamVector& pi) {
  auto p = e.param();
  return p ? static_cast<int>(pi.index_of(*p)) : -1;
}

Walk walk_chain(const ChainSpec& chain, const Eigen::VectorXd& q, const ParamVector& pi) {
  check_q(chain, q);
  Walk w;
  Pose t;
  auto step = [&](const ElementaryTransform& e, std::vector<Site>& sites) {
    Site s{t, e.kind, param_column(e, pi), -1};
    if (const auto* jb = std::get_if<JointBinding>(&e.binding)) s.joint = jb->index - 1;
    sites.push_back(s);
    t = t * elementary(e.kind, element_argument(e, q, pi));
  };
  for (const auto& e : chain.base) step(e, w.shared);
  for (const auto& e : chain.elements) step(e, w.shared);
  w.flange = t;
  if (chain.tools.empty()) {
    w.ends.push_back(t);
    w.tools.emplace_back();
    return w;
  }
  for (const auto& block : chain.tools) {
    t = w.flange;
    w.tools.emplace_back();
    for (const auto& e : block) step(e, w.tools.back());
    w.ends.push_back(t);
  }
  return w;
}

/// Position derivative of point p for a unit change of the element argument.
Vector3 point_derivative(const Site& s, const Vector3& p) {
  const Vector3 axis = s.before.rotation.col(axis_index(s.kind));
  if (!is_rotation(s.kind)) return axis;
  return axis.cross(p - s.before.translation);
}

}  // namespace

std::vector<Pose> forward_kinematics(const ChainSpec& chain, const Eigen::VectorXd& q, const ParamVector& pi) {
  return walk_chain(chain, q, pi).ends;
}

Pose flange_pose(const ChainSpec& chain, const Eigen::VectorXd& q, const ParamVector& pi) {
  return walk_chain(chain, q, pi).flange;
}

Pose robot_pose(const ChainSpec& chain, const Eigen::VectorXd& q, const ParamVector& pi) {
  check_q(chain, q);
  Pose t;
  for (const auto& e : chain.elements) t = t * elementary(e.kind, element_argument(e, q, pi));
  return t;
}

Eigen::VectorXd reference_positions(const ChainSpec& chain, const Eigen::VectorXd& q, const ParamVector& pi) {
  const auto ends = forward_kinematics(chain, q, pi);
  Eigen::VectorXd out(3 * static_cast<Eigen::Index>(ends.size()));
  for (std::size_t j = 0; j < ends.size(); ++j) out.segment<3>(3 * static_cast<Eigen::Index>(j)) = ends[j].translation;
  return out;
}

Eigen::MatrixXd jacobian_params(const ChainSpec& chain, const Eigen::VectorXd& q, const ParamVector& pi) {
  const Walk w = walk_chain(chain, q, pi);
  const auto n_ref = static_cast<Eigen::Index>(w.ends.size());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(3 * n_ref, static_cast<Eigen::Index>(pi.size()));
  for (Eigen::Index j = 0; j < n_ref; ++j) {
    const Vector3 p = w.ends[static_cast<std::size_t>(j)].translation;
    auto accumulate = [&](const std::vector<Site>& sites) {
      for (const auto& s : sites) {
        if (s.param < 0) continue;
        jac.block<3, 1>(3 * j, s.param) += point_derivative(s, p);
      }
    };
    accumulate(w.shared);
    accumulate(w.tools[static_cast<std::size_t>(j)]);
  }
  return jac;
}

Eigen::MatrixXd jacobian_joints(const ChainSpec& chain, const Eigen::VectorXd& q, const ParamVector& pi,
                                std::size_t tool) {
  const Walk w = walk_chain(chain, q, pi);
  if (tool >= w.ends.size()) throw std::invalid_argument("tool index out of range");
  const Vector3 p = w.ends[tool].translation;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(6, static_cast<Eigen::Index>(chain.joint_count()));
  for (const auto& s : w.shared) {
    if (s.joint < 0) continue;
    const Vector3 axis = s.before.rotation.col(axis_index(s.kind));
    jac.block<3, 1>(0, s.joint) = axis.cross(p - s.before.translation);
    jac.block<3, 1>(3, s.joint) = axis;
  }
  return jac;
}

}  // namespace elastocal
