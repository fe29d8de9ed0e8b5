#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "elastocal/pose.hpp"

namespace elastocal {

struct ConstantBinding {
  double value = 0.0;
};

/// Joint-driven argument: q[index-1] + home + deviation(offset_param).
struct JointBinding {
  int index = 1;
  double home = 0.0;
  std::optional<std::string> offset_param;
};

/// Deviation-driven argument: nominal + deviation(param).
struct DeviationBinding {
  std::string param;
  double nominal = 0.0;
};

using Binding = std::variant<ConstantBinding, JointBinding, DeviationBinding>;

struct ElementaryTransform {
  TransformKind kind = TransformKind::Tx;
  Binding binding;

  /// Parameter id carried by this element, if any.
  std::optional<std::string> param() const;
  /// Argument value with every deviation at zero and the joint at zero.
  double nominal_value() const;
};

struct JointInfo {
  int index = 1;
  char axis = 'z';
  std::optional<std::pair<double, double>> limits;  // rad
};

/// Ordered chain T_base * T_robot(q) * T_tool^j. One tool block per measured
/// reference point; a chain without tool blocks has one reference point at the
/// flange.
struct ChainSpec {
  std::string name;
  std::vector<JointInfo> joints;
  std::vector<ElementaryTransform> base;
  std::vector<ElementaryTransform> elements;
  std::vector<std::vector<ElementaryTransform>> tools;

  std::size_t joint_count() const { return joints.size(); }
  std::size_t reference_count() const { return tools.empty() ? 1 : tools.size(); }

  /// Checks the structural invariants; throws ModelError.
  void validate() const;

  /// Position of the rotation element driven by joint `index` within `elements`.
  std::size_t joint_element(int index) const;

  bool operator==(const ChainSpec&) const = default;
};

bool operator==(const ConstantBinding& a, const ConstantBinding& b);
bool operator==(const JointBinding& a, const JointBinding& b);
bool operator==(const DeviationBinding& a, const DeviationBinding& b);
bool operator==(const ElementaryTransform& a, const ElementaryTransform& b);
bool operator==(const JointInfo& a, const JointInfo& b);

enum class ParamGroup { Robot, Base, Tool };
enum class ParamUnit { Millimeter, Radian };

struct ParamEntry {
  std::string id;
  double nominal = 0.0;
  double deviation = 0.0;
  ParamUnit unit = ParamUnit::Millimeter;
  ParamGroup group = ParamGroup::Robot;
  int tool = -1;  // tool block index for ParamGroup::Tool

  double value() const { return nominal + deviation; }
};

/// Named geometric deviations. Order is the canonical identification order:
/// robot elements, then base, then tool blocks.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::vector<ParamEntry> entries);

  /// All parameters of `chain` with zero deviation.
  static ParamVector from_chain(const ChainSpec& chain);

  std::size_t size() const { return entries_.size(); }
  const std::vector<ParamEntry>& entries() const { return entries_; }
  const ParamEntry& operator[](std::size_t i) const { return entries_[i]; }

  std::optional<std::size_t> find(const std::string& id) const;
  /// Throws ModelError for unknown ids.
  std::size_t index_of(const std::string& id) const;
  double deviation(const std::string& id) const { return entries_[index_of(id)].deviation; }
  void set_deviation(const std::string& id, double d) { entries_[index_of(id)].deviation = d; }
  void set_deviation(std::size_t i, double d) { entries_[i].deviation = d; }

  Eigen::VectorXd deviations() const;
  void set_deviations(const Eigen::VectorXd& d);
  std::vector<std::string> ids() const;
  std::vector<std::size_t> indices_in(ParamGroup g) const;

 private:
  std::vector<ParamEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace elastocal
