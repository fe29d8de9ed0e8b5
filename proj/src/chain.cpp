#include "elastocal/chain.hpp"

#include <set>
#include <sstream>

#include "elastocal/errors.hpp"

namespace elastocal {

bool operator==(const ConstantBinding& a, const ConstantBinding& b) { return a.value == b.value; }
bool operator==(const JointBinding& a, const JointBinding& b) {
  return a.index == b.index && a.home == b.home && a.offset_param == b.offset_param;
}
bool operator==(const DeviationBinding& a, const DeviationBinding& b) {
  return a.param == b.param && a.nominal == b.nominal;
}
bool operator==(const ElementaryTransform& a, const ElementaryTransform& b) {
  return a.kind == b.kind && a.binding == b.binding;
}
bool operator==(const JointInfo& a, const JointInfo& b) {
  return a.index == b.index && a.axis == b.axis && a.limits == b.limits;
}

std::optional<std::string> ElementaryTransform::param() const {
  if (const auto* d = std::get_if<DeviationBinding>(&binding)) return d->param;
  if (const auto* j = std::get_if<JointBinding>(&binding)) return j->offset_param;
  return std::nullopt;
}

double ElementaryTransform::nominal_value() const {
  return std::visit(
      [](const auto& b) -> double {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, ConstantBinding>) return b.value;
        if constexpr (std::is_same_v<T, JointBinding>) return b.home;
        if constexpr (std::is_same_v<T, DeviationBinding>) return b.nominal;
      },
      binding);
}

namespace {

void check_block(const std::vector<ElementaryTransform>& block, const std::string& where,
                 std::set<std::string>& seen) {
  for (std::size_t i = 0; i < block.size(); ++i) {
    const auto& e = block[i];
    if (std::holds_alternative<JointBinding>(e.binding)) {
      throw ModelError(where + "[" + std::to_string(i) + "]: joint-driven element outside the robot chain");
    }
    if (auto p = e.param()) {
      if (p->empty()) throw ModelError(where + "[" + std::to_string(i) + "]: empty parameter id");
      if (!seen.insert(*p).second) {
        throw ModelError(where + "[" + std::to_string(i) + "]: parameter '" + *p + "' bound twice");
      }
    }
  }
}

}  // namespace

void ChainSpec::validate() const {
  if (joints.empty()) throw ModelError("chain '" + name + "' declares no joints");
  const int n = static_cast<int>(joints.size());
  std::vector<int> declared(n + 1, 0);
  for (std::size_t i = 0; i < joints.size(); ++i) {
    const auto& j = joints[i];
    if (j.index < 1 || j.index > n) {
      throw ModelError("joints[" + std::to_string(i) + "]: index " + std::to_string(j.index) +
                       " outside [1, " + std::to_string(n) + "]");
    }
    if (j.axis != 'x' && j.axis != 'y' && j.axis != 'z') {
      throw ModelError("joints[" + std::to_string(i) + "]: invalid axis label");
    }
    if (declared[j.index]++) {
      throw ModelError("joints[" + std::to_string(i) + "]: joint " + std::to_string(j.index) + " declared twice");
    }
    if (j.limits && !(j.limits->first <= j.limits->second)) {
      throw ModelError("joints[" + std::to_string(i) + "]: empty limit interval");
    }
  }

  std::set<std::string> seen;
  std::vector<int> driven(n + 1, 0);
  for (std::size_t i = 0; i < elements.size(); ++i) {
    const auto& e = elements[i];
    if (const auto* jb = std::get_if<JointBinding>(&e.binding)) {
      const std::string where = "elements[" + std::to_string(i) + "]";
      if (jb->index < 1 || jb->index > n) {
        throw ModelError(where + ": joint index " + std::to_string(jb->index) + " outside [1, " +
                         std::to_string(n) + "]");
      }
      if (!is_rotation(e.kind)) throw ModelError(where + ": joint-driven element must be a rotation");
      const JointInfo* info = nullptr;
      for (const auto& j : joints) {
        if (j.index == jb->index) info = &j;
      }
      const char label = static_cast<char>('x' + axis_index(e.kind));
      if (info->axis != label) {
        throw ModelError(where + ": joint " + std::to_string(jb->index) + " is labelled '" +
                         std::string(1, info->axis) + "' but drives " + std::string(to_string(e.kind)));
      }
      if (driven[jb->index]++) {
        throw ModelError(where + ": joint " + std::to_string(jb->index) + " drives more than one element");
      }
    }
    if (auto p = e.param()) {
      if (p->empty()) throw ModelError("elements[" + std::to_string(i) + "]: empty parameter id");
      if (!seen.insert(*p).second) {
        throw ModelError("elements[" + std::to_string(i) + "]: parameter '" + *p + "' bound twice");
      }
    }
  }
  for (int j = 1; j <= n; ++j) {
    if (!driven[j]) throw ModelError("joint " + std::to_string(j) + " drives no element");
  }
  // Joints must appear in increasing order along the chain.
  int last = 0;
  for (const auto& e : elements) {
    if (const auto* jb = std::get_if<JointBinding>(&e.binding)) {
      if (jb->index != last + 1) throw ModelError("joint-driven elements are not ordered 1..n along the chain");
      last = jb->index;
    }
  }
  check_block(base, "base", seen);
  for (std::size_t t = 0; t < tools.size(); ++t) check_block(tools[t], "tools[" + std::to_string(t) + "]", seen);
}

std::size_t ChainSpec::joint_element(int index) const {
  for (std::size_t i = 0; i < elements.size(); ++i) {
    if (const auto* jb = std::get_if<JointBinding>(&elements[i].binding); jb && jb->index == index) return i;
  }
  throw ModelError("joint " + std::to_string(index) + " drives no element");
}

ParamVector::ParamVector(std::vector<ParamEntry> entries) : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!index_.emplace(entries_[i].id, i).second) {
      throw ModelError("duplicate parameter id '" + entries_[i].id + "'");
    }
  }
}

ParamVector ParamVector::from_chain(const ChainSpec& chain) {
  std::vector<ParamEntry> out;
  auto add_block = [&](const std::vector<ElementaryTransform>& block, ParamGroup g, int tool) {
    for (const auto& e : block) {
      auto p = e.param();
      if (!p) continue;
      ParamEntry entry;
      entry.id = *p;
      if (const auto* d = std::get_if<DeviationBinding>(&e.binding)) entry.nominal = d->nominal;
      entry.unit = is_rotation(e.kind) ? ParamUnit::Radian : ParamUnit::Millimeter;
      entry.group = g;
      entry.tool = tool;
      out.push_back(std::move(entry));
    }
  };
  add_block(chain.elements, ParamGroup::Robot, -1);
  add_block(chain.base, ParamGroup::Base, -1);
  for (std::size_t t = 0; t < chain.tools.size(); ++t) add_block(chain.tools[t], ParamGroup::Tool, static_cast<int>(t));
  return ParamVector(std::move(out));
}

std::optional<std::size_t> ParamVector::find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t ParamVector::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ModelError("unresolved parameter id '" + id + "'");
  return it->second;
}

Eigen::VectorXd ParamVector::deviations() const {
  Eigen::VectorXd d(static_cast<Eigen::Index>(entries_.size()));
  for (std::size_t i = 0; i < entries_.size(); ++i) d[static_cast<Eigen::Index>(i)] = entries_[i].deviation;
  return d;
}

void ParamVector::set_deviations(const Eigen::VectorXd& d) {
  if (static_cast<std::size_t>(d.size()) != entries_.size()) {
    throw std::invalid_argument("deviation vector length mismatch");
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i].deviation = d[static_cast<Eigen::Index>(i)];
}

std::vector<std::string> ParamVector::ids() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.id);
  return out;
}

std::vector<std::size_t> ParamVector::indices_in(ParamGroup g) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].group == g) out.push_back(i);
  }
  return out;
}

}  // namespace elastocal
