#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "elastocal/chain.hpp"
#include "elastocal/doe.hpp"
#include "elastocal/pose.hpp"

namespace elastocal {

/// Measured position of reference point `point` (tool block index) in
/// configuration `config` (plan row), mm.
struct Measurement {
  std::size_t config = 0;
  std::size_t point = 0;
  Vector3 position = Vector3::Zero();
};

using MeasurementSet = std::vector<Measurement>;

/// Measurement CSV: header config_index,point_index,x_mm,y_mm,z_mm; indices
/// are 1-based in the file. Lines starting with '#' are comments.
MeasurementSet parse_measurements_csv(const std::string& text, const std::string& source = "<measurements>");
MeasurementSet read_measurements_csv(const std::filesystem::path& path);
std::string format_measurements_csv(const MeasurementSet& m, const std::vector<std::string>& header_comments = {});

/// Throws std::invalid_argument when an index is out of range for the chain
/// and plan.
void check_measurements(const MeasurementSet& m, const ChainSpec& chain, const PosePlan& plan);

// ---------------------------------------------------------------------------
// Planar chain in the cumulative-angle parameterization:
//   p = sum_i (l_i + dl_i) (cos(theta_i + dtheta_i), sin(theta_i + dtheta_i)),
//   theta_i = q_1 + ... + q_i.
// Deviation vector: [dl_1 .. dl_n, dtheta_1 .. dtheta_n].

struct PlanarModel {
  std::vector<double> lengths;

  std::size_t joint_count() const { return lengths.size(); }
  std::size_t parameter_count() const { return 2 * lengths.size(); }
  Eigen::Vector2d position(const Eigen::VectorXd& q, const Eigen::VectorXd& deviations) const;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& q, const Eigen::VectorXd& deviations) const;
};

struct PlanarResult {
  Eigen::VectorXd deviations;
  std::vector<double> rms_history;  // before the first step, then after each
  int iterations = 0;
  double condition = 0.0;
};

/// One linearized least-squares step from `initial`. `measured` is m x 2.
/// Throws UnidentifiableError on rank deficiency.
PlanarResult planar_step(const PlanarModel& model, const PosePlan& plan, const Eigen::MatrixXd& measured,
                         const Eigen::VectorXd& initial);

/// Repeats planar_step until the update norm drops below `tolerance`.
PlanarResult planar_identify(const PlanarModel& model, const PosePlan& plan, const Eigen::MatrixXd& measured,
                             const Eigen::VectorXd& initial, int max_iterations = 20, double tolerance = 1e-12);

// ---------------------------------------------------------------------------
// Spatial identification on ChainSpec models.

struct BaseToolEstimate {
  ParamVector params;  // input params with base and tool deviations replaced
  Vector3 base_position = Vector3::Zero();
  Matrix3 base_rotation = Matrix3::Identity();
  std::vector<Vector3> tool_points;      // in the flange frame
  std::vector<Vector3> tool_transported;  // R_base * tool point
  double rms = 0.0;
  int iterations = 0;
  double condition = 0.0;
};

/// Step 1: registers base and tool frames with the robot parameters held at
/// `current`. Gauss-Newton on the base block parameters and the tool
/// translations, with the base rotation re-composed after every step.
/// Throws DegenerateSetupError when the frames are not observable.
BaseToolEstimate identify_base_tool(const MeasurementSet& measurements, const ChainSpec& chain, const PosePlan& plan,
                                    const ParamVector& current, int max_iterations = 50);

struct IdentResult {
  ParamVector params;
  Vector3 base_position = Vector3::Zero();
  Matrix3 base_rotation = Matrix3::Identity();
  std::vector<Vector3> tool_points;
  std::vector<double> rms_history;  // after Step 1, then after each joint update
  int iterations = 0;
  bool converged = false;
  std::string diagnostics;
  double condition = 0.0;
  /// Covariance of the estimated parameters (order of `estimated`), scaled by
  /// the assumed or estimated noise variance.
  Eigen::MatrixXd covariance;
  Eigen::VectorXd standard_deviations;
  std::vector<std::size_t> estimated;  // indices into params
  double sigma = 0.0;                  // noise level used for the covariance
};

/// Step 2: one least-squares update of the robot parameters with base and
/// tool held fixed. Throws UnidentifiableError naming the parameters in the
/// null space (the usual cause is an unreduced chain).
IdentResult identify_robot_params(const MeasurementSet& measurements, const ChainSpec& chain, const PosePlan& plan,
                                  const ParamVector& current, std::optional<double> sigma = std::nullopt);

struct CalibrationOptions {
  int max_iterations = 20;
  double update_tolerance = 1e-10;
  /// Noise level for the reported covariance; estimated from the residuals
  /// when absent.
  std::optional<double> sigma;
};

/// Step 1 from `initial`, then Gauss-Newton on robot, base and tool
/// parameters together until the update norm is below tolerance.
/// Non-convergence is flagged in the result, not thrown.
IdentResult calibrate(const MeasurementSet& measurements, const ChainSpec& chain, const PosePlan& plan,
                      const ParamVector& initial, const CalibrationOptions& options = {});

/// RMS over all coordinates of measured minus modeled positions (mm).
double residual_rms(const MeasurementSet& measurements, const ChainSpec& chain, const PosePlan& plan,
                    const ParamVector& params);

}  // namespace elastocal
