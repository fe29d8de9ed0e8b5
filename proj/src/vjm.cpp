#include "elastocal/vjm.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "elastocal/errors.hpp"
#include "elastocal/kinematics.hpp"
#include "elastocal/linalg.hpp"

namespace elastocal {

namespace {

void check_link_spring(const LinkSpring& s, const std::string& what) {
  if (s.beam) {
    try {
      s.beam->with_length(s.beam->L > 0.0 ? s.beam->L : 1.0).validate();
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(what + ": " + e.what());
    }
    return;
  }
  if (symmetry_error(s.matrix) > 1e-9 || !s.matrix.allFinite()) {
    throw std::invalid_argument(what + ": stiffness matrix must be symmetric");
  }
  Eigen::LLT<Matrix6> llt(s.matrix);
  if (llt.info() != Eigen::Success) throw std::invalid_argument(what + ": stiffness matrix must be positive definite");
}

/// Spring stiffness in the spring frame `spring` for a link running from
/// `beam` along its x axis.
Matrix6 link_stiffness(const LinkSpring& s, const Pose& beam, double length, const Matrix3& spring) {
  if (!s.beam) return s.matrix;
  const Matrix6 local = beam_stiffness_local(s.beam->with_length(length));
  const Matrix6 ad = rotate6(spring.transpose() * beam.rotation);
  return ad * local * ad.transpose();
}

/// Unit twists of a 6-dof spring at `frame`, seen at point p.
Eigen::Matrix<double, 6, 6> spring_columns(const Pose& frame, const Vector3& p) {
  Eigen::Matrix<double, 6, 6> cols = Eigen::Matrix<double, 6, 6>::Zero();
  for (int k = 0; k < 3; ++k) {
    const Vector3 a = frame.rotation.col(k);
    cols.block<3, 1>(0, k) = a;
    cols.block<3, 1>(0, 3 + k) = a.cross(p - frame.translation);
    cols.block<3, 1>(3, 3 + k) = a;
  }
  return cols;
}

double segment_length(const SerialFrames& f, std::size_t link) {
  const Vector3 end = link + 1 < f.joint.size() ? f.link_end[link].translation : f.tool.translation;
  return (end - f.joint[link].translation).norm();
}

}  // namespace

std::size_t VjmModel::theta_count() const {
  return springs.joints.size() + 6 * springs.links.size() + (springs.tool ? 6 : 0);
}

SerialFrames serial_frames(const ChainSpec& chain, const Eigen::VectorXd& q, const ParamVector& pi) {
  SerialFrames f;
  Pose t;
  for (const auto& e : chain.base) t = t * elementary(e.kind, element_argument(e, q, pi));
  for (const auto& e : chain.elements) {
    const bool is_joint = std::holds_alternative<JointBinding>(e.binding);
    if (is_joint && !f.joint.empty()) f.link_end.push_back(t);
    t = t * elementary(e.kind, element_argument(e, q, pi));
    if (is_joint) f.joint.push_back(t);
  }
  f.tool = forward_kinematics(chain, q, pi).front();
  return f;
}

Pose link_beam_frame(const SerialFrames& f, std::size_t link) {
  const Pose& start = f.joint.at(link);
  const Vector3 end = link + 1 < f.joint.size() ? f.link_end.at(link).translation : f.tool.translation;
  return Pose{beam_frame(start.rotation, end - start.translation), start.translation};
}

VjmModel build_vjm(const ChainSpec& chain, const SpringSet& springs) {
  chain.validate();
  const std::size_t n = chain.joint_count();
  if (n == 0) throw std::invalid_argument("stiffness model needs at least one joint");
  if (springs.joints.size() != n) {
    throw std::invalid_argument("expected " + std::to_string(n) + " joint springs, got " +
                                std::to_string(springs.joints.size()));
  }
  if (springs.links.size() != n - 1) {
    throw std::invalid_argument("expected " + std::to_string(n - 1) + " link springs, got " +
                                std::to_string(springs.links.size()));
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!std::isfinite(springs.joints[j]) || springs.joints[j] <= 0.0) {
      throw std::invalid_argument("joint " + std::to_string(j + 1) + " spring stiffness must be positive");
    }
  }
  for (std::size_t j = 0; j + 1 < n; ++j) check_link_spring(springs.links[j], "link " + std::to_string(j + 1));
  if (springs.tool) check_link_spring(*springs.tool, "tool segment");

  // Declared beam lengths must match the nominal geometry (link lengths do not depend on q).
  const ParamVector nominal = ParamVector::from_chain(chain);
  const SerialFrames f = serial_frames(chain, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)), nominal);
  auto check_length = [&](const LinkSpring& s, std::size_t link, const std::string& what) {
    const double geometric = segment_length(f, link);
    if (s.beam && geometric < 1e-9) throw ModelError(what + " has zero length; a beam cannot be attached");
    if (s.beam && s.beam->L > 0.0 && std::abs(s.beam->L - geometric) > 1e-6 * geometric) {
      throw ModelError(what + ": beam length " + std::to_string(s.beam->L) + " does not match the chain (" +
                       std::to_string(geometric) + ")");
    }
  };
  for (std::size_t j = 0; j + 1 < n; ++j) check_length(springs.links[j], j, "link " + std::to_string(j + 1));
  if (springs.tool) check_length(*springs.tool, n - 1, "tool segment");
  return VjmModel{chain, springs};
}

SpringJacobians spring_jacobians(const VjmModel& model, const Eigen::VectorXd& q, const ParamVector& pi) {
  const ChainSpec& chain = model.chain;
  const std::size_t n = chain.joint_count();
  const SerialFrames f = serial_frames(chain, q, pi);
  const Vector3 p = f.tool.translation;
  const auto nt = static_cast<Eigen::Index>(model.theta_count());

  SpringJacobians out;
  out.theta = Eigen::MatrixXd::Zero(6, nt);
  out.k_theta = Eigen::MatrixXd::Zero(nt, nt);
  out.q = jacobian_joints(chain, q, pi, 0);

  Eigen::Index col = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const auto& info = chain.joints[j];
    const Vector3 a = f.joint[j].rotation.col(info.axis - 'x');
    out.theta.block<3, 1>(0, col) = a.cross(p - f.joint[j].translation);
    out.theta.block<3, 1>(3, col) = a;
    out.k_theta(col, col) = model.springs.joints[j];
    out.blocks.push_back(1);
    ++col;
    const LinkSpring* link = j + 1 < n ? &model.springs.links[j] : (model.springs.tool ? &*model.springs.tool : nullptr);
    if (!link) continue;
    const Pose& spring = j + 1 < n ? f.link_end[j] : f.tool;
    out.theta.middleCols<6>(col) = spring_columns(spring, p);
    out.k_theta.block<6, 6>(col, col) = link_stiffness(*link, link_beam_frame(f, j), segment_length(f, j), spring.rotation);
    out.blocks.push_back(6);
    col += 6;
  }
  return out;
}

VjmStiffness cartesian_stiffness_vjm(const VjmModel& model, const Eigen::VectorXd& q, const ParamVector& pi,
                                     const std::vector<int>& passive_joints) {
  const SpringJacobians jac = spring_jacobians(model, q, pi);
  const Eigen::Index nt = jac.k_theta.rows();
  Eigen::MatrixXd k_inv = Eigen::MatrixXd::Zero(nt, nt);
  Eigen::Index at = 0;
  for (const int size : jac.blocks) {
    k_inv.block(at, at, size, size) = spd_inverse(jac.k_theta.block(at, at, size, size), "spring stiffness");
    at += size;
  }

  VjmStiffness out;
  out.compliance = jac.theta * k_inv * jac.theta.transpose();
  out.compliance = 0.5 * (out.compliance + out.compliance.transpose()).eval();
  out.locked = spd_inverse(out.compliance, "Cartesian compliance");
  out.locked = 0.5 * (out.locked + out.locked.transpose()).eval();
  out.stiffness = out.locked;

  if (!passive_joints.empty()) {
    Eigen::MatrixXd jq(6, static_cast<Eigen::Index>(passive_joints.size()));
    for (std::size_t k = 0; k < passive_joints.size(); ++k) {
      const int j = passive_joints[k];
      if (j < 1 || j > jac.q.cols()) throw std::invalid_argument("passive joint " + std::to_string(j) + " out of range");
      jq.col(static_cast<Eigen::Index>(k)) = jac.q.col(j - 1);
    }
    const Eigen::MatrixXd projected = jq.transpose() * out.locked * jq;
    const Eigen::MatrixXd k_cq = spd_inverse(projected, "passive joint projection") * jq.transpose() * out.locked;
    out.stiffness = out.locked - out.locked * jq * k_cq;
    out.stiffness = 0.5 * (out.stiffness + out.stiffness.transpose()).eval();
  }
  out.deflection = k_inv * jac.theta.transpose() * out.stiffness;
  return out;
}

}  // namespace elastocal
