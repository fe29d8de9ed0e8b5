#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace elastocal {

/// Concrete measurement plan: one row per configuration, angles in rad.
struct PosePlan {
  Eigen::MatrixXd configurations;  // m x n
  std::vector<std::string> labels;  // per row, may be empty

  Eigen::Index rows() const { return configurations.rows(); }
  Eigen::Index joints() const { return configurations.cols(); }
  Eigen::VectorXd configuration(Eigen::Index k) const { return configurations.row(k).transpose(); }
};

/// constant + sum(coefficient * symbol), rad.
struct AffineAngle {
  double constant = 0.0;
  std::map<std::string, double> terms;

  double evaluate(const std::map<std::string, double>& bindings) const;
};

/// Plan whose angles still depend on free symbols.
struct SymbolicPlan {
  std::vector<std::vector<AffineAngle>> cells;  // m rows of n angles
  std::vector<std::string> labels;

  std::size_t rows() const { return cells.size(); }
  std::size_t joints() const { return cells.empty() ? 0 : cells.front().size(); }
  /// Free symbols in order of first appearance (row-major).
  std::vector<std::string> symbols() const;
  /// Throws std::invalid_argument when a symbol is unbound.
  PosePlan evaluate(const std::map<std::string, double>& bindings) const;
};

struct PairResidual {
  int i = 0;
  int j = 0;
  double cos_sum = 0.0;
  double sin_sum = 0.0;
};

struct OptimalityReport {
  std::vector<PairResidual> residuals;
  double max_abs = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

inline constexpr double kOptimalityTolerance = 1e-9;

/// Cosine and sine sums over the configurations of the cumulative angle
/// differences S_i - S_j, S_i = q_1 + ... + q_i, for 1 <= j < i <= n.
/// With `include_fixed_frame` the pairs j = 0 (S_0 = 0) are added, which ties
/// the plan to the fixed frame and makes the first column matter.
OptimalityReport optimality_residual(const PosePlan& plan, double tolerance = kOptimalityTolerance,
                                     bool include_fixed_frame = false);

/// Residual restricted to a subset of columns (0-based), in the given order.
/// A negative index stands for a virtual joint held at zero.
OptimalityReport optimality_residual(const PosePlan& plan, const std::vector<int>& columns,
                                     double tolerance = kOptimalityTolerance, bool include_fixed_frame = false);

/// Symbol names used by the pattern generators.
struct PatternSymbols {
  std::string alpha = "alpha";  // per-row first-joint angles get suffixes 1..m
  std::string beta = "beta";    // n3m3: beta; n4m4: beta1, beta2
  std::string gamma = "gamma";
  std::string delta = "delta";
};

/// Three joints, three configurations. Columns 2 and 3 step by 2*pi/3.
SymbolicPlan symbolic_n3m3(const PatternSymbols& names = {});
PosePlan pattern_n3m3(const std::array<double, 3>& alpha, double beta, double gamma);

/// Four joints, four configurations; columns 2 and 4 pair up as antipodes.
SymbolicPlan symbolic_n4m4(const PatternSymbols& names = {});
PosePlan pattern_n4m4(const std::array<double, 4>& alpha, double beta1, double beta2, double gamma,
                      double delta);

/// Row concatenation. Throws std::invalid_argument on mismatched joint counts
/// (empty plans are skipped).
PosePlan superpose(const std::vector<PosePlan>& plans);
SymbolicPlan superpose(const std::vector<SymbolicPlan>& plans);

/// Row reordering: out.row(k) = plan.row(order[k]).
PosePlan permute(const PosePlan& plan, const std::vector<std::size_t>& order);

/// Planar sub-chains of a spatial chain. Entries are 1-based joint indices;
/// 0 marks a virtual joint, allowed only in leading position.
struct SubchainDecomposition {
  std::vector<std::vector<int>> subchains;

  /// Throws std::invalid_argument unless every joint 1..n appears exactly once.
  void validate(int joint_count) const;
  /// 0-based plan columns of subchain s, -1 for the virtual joint.
  std::vector<int> columns(std::size_t s) const;
};

/// Cartesian product of the sub-plans' rows, the first sub-chain outermost.
/// Virtual-joint columns are dropped; free symbols stay symbolic.
SymbolicPlan combine_subchains(const SubchainDecomposition& decomp, const std::vector<SymbolicPlan>& subplans,
                               int joint_count);

struct FreeAngleOptions {
  double grid_step = 10.0 * 3.14159265358979323846 / 180.0;
  double tolerance = kOptimalityTolerance;
  std::uint64_t seed = 0;
  int restarts = 32;
  int max_sweeps = 20;
  /// Starting point; unbound symbols start from seeded grid values.
  std::map<std::string, double> initial;
};

struct FreeAngleSolution {
  PosePlan plan;  // angles wrapped to (-pi, pi]
  std::map<std::string, double> bindings;
  OptimalityReport report;
  double limit_violation = 0.0;
};

using JointLimits = std::vector<std::optional<std::pair<double, double>>>;

/// Assigns the free symbols so that every angle (wrapped to (-pi, pi]) lies
/// within its limits and the full-chain residual is below tolerance.
/// Coordinate-wise grid search over lexicographic (limit violation, residual)
/// followed by a shrinking-step local descent; seeded restarts. Throws
/// NoSolutionError with the best residual when the budget runs out.
FreeAngleSolution solve_free_angles(const SymbolicPlan& plan, const JointLimits& limits,
                                    const FreeAngleOptions& options = {});

double wrap_angle(double a);

struct CovarianceReport {
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd information;  // sum J^T J
  double log_det_information = 0.0;
  /// max |I_ij| / sqrt(I_ii I_jj) over i != j.
  double diagonality_defect = 0.0;
  double condition = 0.0;
};

/// sigma^2 (sum J^T J)^-1 for per-configuration Jacobians. Throws
/// UnidentifiableError (naming the parameters in the null space when `names`
/// is given) on rank deficiency.
CovarianceReport covariance(const std::vector<Eigen::MatrixXd>& jacobians, double sigma,
                            const std::vector<std::string>& names = {});

/// m configurations drawn uniformly within the limits (full circle when a
/// joint has none).
PosePlan random_plan(std::size_t m, const JointLimits& limits, std::uint64_t seed);

/// KUKA-style decomposition: outer (1,3,5,7), inner (virtual,2,4,6).
SubchainDecomposition kuka_decomposition();
/// The 16-row symbolic plan: n4m4 on both sub-chains.
SymbolicPlan kuka_symbolic_plan();
/// Free-angle values used in the published case study (rad).
std::map<std::string, double> kuka_reference_assignment();

/// First-joint column of the published 16-configuration plan (rad). The
/// residual ignores this column, but a constant one leaves the base rotation
/// confounded with the first link, so concrete plans must vary it.
std::vector<double> kuka_reference_first_joint();
/// Overwrites column 0; throws std::invalid_argument on a size mismatch.
void set_first_joint(PosePlan& plan, const std::vector<double>& column);
/// Reference assignment, wrapped, with the reference first-joint column.
PosePlan kuka_optimal_plan();

/// Plan CSV: optional "# key: value" lines, a header of joint names
/// (plus an optional trailing "label"), one row per configuration in degrees.
struct PlanFile {
  PosePlan plan;
  std::vector<std::string> joint_names;
  std::vector<std::pair<std::string, std::string>> meta;

  std::optional<std::string> meta_value(const std::string& key) const;
};

PlanFile read_plan_csv(const std::filesystem::path& path);
PlanFile parse_plan_csv(const std::string& text, const std::string& source = "<plan>");
std::string format_plan_csv(const PlanFile& file);
std::vector<std::string> default_joint_names(std::size_t n);

/// "1,3,5,7|0,2,4,6" <-> decomposition.
SubchainDecomposition parse_decomposition(const std::string& text);
std::string format_decomposition(const SubchainDecomposition& decomp);

}  // namespace elastocal
