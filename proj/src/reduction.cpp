#include "elastocal/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <Eigen/Dense>

#include "elastocal/errors.hpp"
#include "elastocal/kinematics.hpp"

namespace elastocal {

namespace {

constexpr double kAxisTol = 1e-9;

bool parallel(const Vector3& a, const Vector3& b) { return a.cross(b).norm() < kAxisTol; }
bool perpendicular(const Vector3& a, const Vector3& b) { return std::abs(a.dot(b)) < kAxisTol; }

struct NominalSite {
  Vector3 axis;    // world axis of the element at the nominal geometry
  Vector3 origin;  // world origin of the frame in front of the element
  const ElementaryTransform* element;
};

class Reducer {
 public:
  explicit Reducer(const ChainSpec& chain) : chain_(chain) {
    chain_.validate();
    const ParamVector pi = ParamVector::from_chain(chain_);
    const Eigen::VectorXd q = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(chain_.joint_count()));
    Pose t;
    auto visit = [&](const std::vector<ElementaryTransform>& block, std::vector<NominalSite>& out) {
      for (const auto& e : block) {
        out.push_back({t.rotation.col(axis_index(e.kind)), t.translation, &e});
        t = t * elementary(e.kind, element_argument(e, q, pi));
      }
    };
    visit(chain_.base, base_);
    visit(chain_.elements, robot_);
    const Pose flange = t;
    tools_.resize(chain_.tools.size());
    for (std::size_t k = 0; k < chain_.tools.size(); ++k) {
      t = flange;
      visit(chain_.tools[k], tools_[k]);
    }
    const int n = static_cast<int>(chain_.joint_count());
    joint_pos_.resize(static_cast<std::size_t>(n) + 1);
    for (int j = 1; j <= n; ++j) joint_pos_[static_cast<std::size_t>(j)] = chain_.joint_element(j);
  }

  ReductionResult run() {
    const int n = static_cast<int>(chain_.joint_count());
    first_joint_rules();
    for (int j = 2; j <= n; ++j) consecutive_rules(j);
    last_joint_rules();
    tool_rotation_rule();
    return {rebuild(), removed_};
  }

 private:
  Vector3 joint_axis(int j) const { return robot_[joint_pos_[static_cast<std::size_t>(j)]].axis; }

  /// True when the element commutes with joint j: a translation along its
  /// axis, or a rotation about the joint axis line itself.
  bool commutes_with_joint(const NominalSite& s, int j) const {
    const auto& joint = robot_[joint_pos_[static_cast<std::size_t>(j)]];
    if (!parallel(s.axis, joint.axis)) return false;
    if (!is_rotation(s.element->kind)) return true;
    const Vector3 offset = s.origin - joint.origin;
    return offset.cross(joint.axis).norm() < kAxisTol * (1.0 + offset.norm());
  }

  /// Robot element range [begin, end) of link j (after joint j, before joint j+1).
  std::pair<std::size_t, std::size_t> link_range(int j) const {
    const std::size_t begin = joint_pos_[static_cast<std::size_t>(j)] + 1;
    const std::size_t end = j == static_cast<int>(chain_.joint_count())
                                ? robot_.size()
                                : joint_pos_[static_cast<std::size_t>(j) + 1];
    return {begin, end};
  }

  void eliminate(const std::string& param, const std::string& rule, const std::string& detail) {
    if (!gone_.insert(param).second) return;
    removed_.push_back({param, rule, detail});
  }

  static bool has_deviation(const ElementaryTransform& e) {
    return std::holds_alternative<DeviationBinding>(e.binding);
  }

  static bool block_has_free_frame(const std::vector<NominalSite>& sites, bool need_rotations) {
    std::vector<Vector3> trans, rots;
    for (const auto& s : sites) {
      if (!has_deviation(*s.element)) continue;
      (is_rotation(s.element->kind) ? rots : trans).push_back(s.axis);
    }
    auto spans = [](const std::vector<Vector3>& axes) {
      if (axes.size() < 3) return false;
      Eigen::MatrixXd m(3, static_cast<Eigen::Index>(axes.size()));
      for (std::size_t i = 0; i < axes.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = axes[i];
      return Eigen::FullPivLU<Eigen::MatrixXd>(m).rank() == 3;
    };
    return spans(trans) && (!need_rotations || spans(rots));
  }

  void first_joint_rules() {
    if (!block_has_free_frame(base_, true)) return;
    const auto& j1 = std::get<JointBinding>(robot_[joint_pos_[1]].element->binding);
    for (std::size_t i = 0; i < joint_pos_[1]; ++i) {
      if (auto p = robot_[i].element->param()) {
        eliminate(*p, "base-absorbed", "constant transform ahead of joint 1 is part of the base frame");
      }
    }
    if (j1.offset_param) {
      eliminate(*j1.offset_param, "first-joint-boundary",
                "rotation offset of joint 1 duplicates the base rotation about the same axis");
    }
    const auto [b, e] = link_range(1);
    for (std::size_t i = b; i < e; ++i) {
      const auto& s = robot_[i];
      if (!has_deviation(*s.element) || !commutes_with_joint(s, 1)) continue;
      eliminate(*s.element->param(), "first-joint-boundary",
                "link-1 term commutes with joint 1 and is absorbed by the base frame");
    }
  }

  void consecutive_rules(int j) {
    const Vector3 aj = joint_axis(j);
    const Vector3 ap = joint_axis(j - 1);
    if (perpendicular(aj, ap)) {
      const auto [b, e] = link_range(j - 1);
      for (std::size_t i = e; i-- > b;) {
        const auto& s = robot_[i];
        if (!has_deviation(*s.element) || !is_rotation(s.element->kind)) continue;
        if (!parallel(s.axis, aj) || gone_.count(*s.element->param())) continue;
        eliminate(*s.element->param(), "perpendicular-axes",
                  "link " + std::to_string(j - 1) + " rotation about the axis of joint " + std::to_string(j));
        break;
      }
    } else if (parallel(aj, ap)) {
      for (int k = 1; k <= j - 1; ++k) {
        const auto [b, e] = link_range(j - k);
        const NominalSite* best = nullptr;
        for (std::size_t i = b; i < e; ++i) {
          const auto& s = robot_[i];
          if (!has_deviation(*s.element) || is_rotation(s.element->kind)) continue;
          if (!perpendicular(s.axis, aj) || gone_.count(*s.element->param())) continue;
          if (!best || std::abs(s.element->nominal_value()) <= std::abs(best->element->nominal_value())) best = &s;
        }
        if (best) {
          eliminate(*best->element->param(), "parallel-axes",
                    "joints " + std::to_string(j - 1) + " and " + std::to_string(j) +
                        " are parallel; translation of link " + std::to_string(j - k) + " orthogonal to them");
          break;
        }
      }
    }
  }

  void last_joint_rules() {
    if (tools_.empty()) return;
    for (const auto& t : tools_) {
      if (!block_has_free_frame(t, false)) return;
    }
    const int n = static_cast<int>(chain_.joint_count());
    const auto [b, e] = link_range(n);
    for (std::size_t i = b; i < e; ++i) {
      if (auto p = robot_[i].element->param()) {
        eliminate(*p, "tool-absorbed", "constant transform after the last joint is absorbed by the tool points");
      }
    }
    const auto& jn = std::get<JointBinding>(robot_[joint_pos_[static_cast<std::size_t>(n)]].element->binding);
    if (jn.offset_param) {
      eliminate(*jn.offset_param, "last-joint-boundary",
                "rotation offset of the last joint is absorbed by the tool points");
    }
    // Trailing run of joints parallel to the last one: terms of the links in
    // front of them that commute with every later joint in the run move
    // straight into the tool points.
    int first = n;
    while (first > 1 && parallel(joint_axis(first - 1), joint_axis(n))) --first;
    auto commutes_with_tail = [&](const NominalSite& s, int from) {
      for (int j = from; j <= n; ++j) {
        if (!commutes_with_joint(s, j)) return false;
      }
      return true;
    };
    for (int link = std::max(first - 1, 1); link < n; ++link) {
      const auto [lb, le] = link_range(link);
      for (std::size_t i = lb; i < le; ++i) {
        const auto& s = robot_[i];
        if (!has_deviation(*s.element) || !commutes_with_tail(s, link + 1)) continue;
        eliminate(*s.element->param(), "last-joint-axial",
                  "link " + std::to_string(link) + " term commutes with joints " + std::to_string(link + 1) + ".." +
                      std::to_string(n) + " and is absorbed by the tool points");
      }
    }
    if (first == 1) {
      for (const auto& s : base_) {
        if (!has_deviation(*s.element) || is_rotation(s.element->kind) || !commutes_with_tail(s, 1)) continue;
        eliminate(*s.element->param(), "last-joint-axial",
                  "every joint is parallel to this base translation; absorbed by the tool points");
      }
    }
  }

  void tool_rotation_rule() {
    for (std::size_t k = 0; k < tools_.size(); ++k) {
      for (const auto& s : tools_[k]) {
        if (has_deviation(*s.element) && is_rotation(s.element->kind)) {
          eliminate(*s.element->param(), "tool-rotation",
                    "tool block " + std::to_string(k + 1) + " rotation is not observable from point measurements");
        }
      }
    }
  }

  std::vector<ElementaryTransform> strip(const std::vector<ElementaryTransform>& block) const {
    std::vector<ElementaryTransform> out;
    for (auto e : block) {
      if (auto* d = std::get_if<DeviationBinding>(&e.binding); d && gone_.count(d->param)) {
        if (d->nominal == 0.0) continue;
        e.binding = ConstantBinding{d->nominal};
      } else if (auto* jb = std::get_if<JointBinding>(&e.binding);
                 jb && jb->offset_param && gone_.count(*jb->offset_param)) {
        jb->offset_param.reset();
      }
      out.push_back(e);
    }
    return out;
  }

  ChainSpec rebuild() const {
    ChainSpec out = chain_;
    out.base = strip(chain_.base);
    out.elements = strip(chain_.elements);
    for (std::size_t k = 0; k < chain_.tools.size(); ++k) out.tools[k] = strip(chain_.tools[k]);
    return out;
  }

  ChainSpec chain_;
  std::vector<NominalSite> base_;
  std::vector<NominalSite> robot_;
  std::vector<std::vector<NominalSite>> tools_;
  std::vector<std::size_t> joint_pos_;
  std::set<std::string> gone_;
  std::vector<Elimination> removed_;
};

}  // namespace

ReductionResult reduce_model(const ChainSpec& chain) { return Reducer(chain).run(); }

}  // namespace elastocal
