#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "elastocal/chain.hpp"
#include "elastocal/doe.hpp"
#include "elastocal/ident.hpp"

namespace elastocal {

/// SplitMix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);
/// Independent seed for (trial, stream) derived from the master seed.
std::uint64_t substream_seed(std::uint64_t master, std::uint64_t trial, std::uint64_t stream);

/// Ground-truth deviations: fixed offset per id plus zero-mean Gaussian
/// noise, by unit.
struct DeviationGenerator {
  double rotation_std = 5e-3;     // rad
  double translation_std = 5e-3;  // mm
  std::map<std::string, double> fixed;

  /// Ids in `fixed` that are not in `params` are ignored.
  ParamVector draw(const ParamVector& params, std::uint64_t seed) const;
};

/// Real-minus-nominal offsets of the published KUKA identification table
/// that are well above the random scale (mm).
std::map<std::string, double> kuka_reference_offsets();

/// Forward kinematics of every configuration and reference point plus i.i.d.
/// Gaussian noise per coordinate. Throws std::invalid_argument on a joint
/// count mismatch or a configuration outside the joint limits.
MeasurementSet simulate_measurements(const ChainSpec& chain, const ParamVector& truth, const PosePlan& plan,
                                     double sigma, std::uint64_t seed);

struct TrajectoryError {
  std::vector<double> per_point;  // mm
  double rms = 0.0;
};

/// Distance between the positions of reference point `point` under the two
/// parameter sets along the trajectory.
TrajectoryError trajectory_error(const ChainSpec& chain, const ParamVector& reference, const ParamVector& test,
                                 const PosePlan& trajectory, std::size_t point = 0);

/// Joint-space samples of a circular arc traced by reference point `point`,
/// solved by damped least squares from `seed_q` on the nominal model.
/// Throws NumericError if a sample cannot be reached within 1e-9 mm.
PosePlan arc_trajectory(const ChainSpec& chain, const Vector3& center, const Vector3& normal, double radius,
                        double start, double end, int samples, const Eigen::VectorXd& seed_q, std::size_t point = 0);

/// Plan taken as is, or drawn afresh within the joint limits in every trial.
struct ScenarioPlan {
  std::string name;
  std::optional<PosePlan> fixed;
  std::size_t random_rows = 0;
};

struct SimScenario {
  ChainSpec chain;  // identification model (reduced)
  std::vector<ScenarioPlan> plans;
  DeviationGenerator generator;
  double sigma = 0.05;
  int trials = 100;
  std::uint64_t seed = 0;
  std::vector<PosePlan> trajectories;
  std::size_t reference_point = 0;
};

struct ParameterRow {
  std::string id;
  std::string group;  // robot, base, tool
  std::string unit;   // mm, rad
  bool in_table = false;  // part of the published table's row set
  double nominal = 0.0;
  double truth = 0.0;               // first trial
  std::vector<double> estimated;    // per plan, first trial (NaN if it failed)
  std::vector<double> improvement;  // per plan against the nominal value
  std::optional<double> improvement_vs_second;  // plan 1 against plan 2
  std::vector<double> rms_error;    // per plan, over all successful trials
};

struct PlanSummary {
  std::string name;
  int successes = 0;
  double mean_covariance_trace = 0.0;
  double mean_log_det_information = 0.0;
  double mean_trajectory_rms = 0.0;
  double mean_improvement = 0.0;  // first trial, finite factors only
  double mean_iterations = 0.0;
};

struct TrialFailure {
  int trial = 0;
  std::string plan;
  std::string message;
};

struct ComparisonReport {
  std::vector<ParameterRow> rows;
  std::vector<PlanSummary> plans;
  double mean_uncalibrated_trajectory_rms = 0.0;
  /// Trials in which plan 1 has a smaller covariance trace than plan 2.
  int dominance_wins = 0;
  int dominance_pairs = 0;
  double mean_improvement_vs_second = 0.0;
  std::vector<TrialFailure> failures;
  /// First-trial trajectory positions: target, uncalibrated, per plan.
  struct Sample {
    std::size_t trajectory = 0;
    std::size_t index = 0;
    Vector3 target;
    Vector3 uncalibrated;
    std::vector<Vector3> calibrated;
  };
  std::vector<Sample> samples;
  /// Per-trial raw numbers, plan-major: [plan][trial].
  std::vector<std::vector<double>> covariance_trace;
  std::vector<std::vector<double>> trajectory_rms;
  std::vector<double> uncalibrated_rms;
  /// Estimation errors [plan][trial][parameter] (NaN rows for failures).
  std::vector<std::vector<Eigen::VectorXd>> errors;
};

/// |truth - baseline| / |truth - estimate|: 0 when the numerator is zero,
/// infinity when the denominator is below 1e-12.
double improvement_factor(double truth, double baseline, double estimate);

/// Runs calibrate for every plan in every trial. Trials are independent and
/// seeded from substreams, so the report does not depend on `jobs`.
ComparisonReport run_comparison(const SimScenario& scenario, int jobs = 1);

/// Scenario file (JSON). Relative paths resolve against the file's folder.
///   {"chain": "kuka-iiwa.json", "reduce": true,
///    "plans": [{"name": "optimal", "file": "kuka-optimal-16.csv"}, {"name": "random", "random": 16}],
///    "sigma": 0.05, "trials": 100, "seed": 1,
///    "deviations": {"rotation_std": 0.005, "translation_std": 0.005, "fixed": {"pz2": 3.8}},
///    "trajectories": ["trajectory-1.csv"], "reference_point": 1}
/// reference_point is 1-based. "fixed" defaults to kuka_reference_offsets()
/// when the chain is named kuka-iiwa, else to none.
SimScenario load_scenario(const std::filesystem::path& path);
SimScenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

nlohmann::json report_to_json(const ComparisonReport& report, const SimScenario& scenario);
std::string report_to_csv(const ComparisonReport& report, const SimScenario& scenario);
std::string trajectories_to_csv(const ComparisonReport& report, const SimScenario& scenario);

}  // namespace elastocal
