#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <numbers>
#include <random>

#include "elastocal/doe.hpp"
#include "elastocal/errors.hpp"
#include "elastocal/ident.hpp"
#include "elastocal/reduction.hpp"
#include "test_util.hpp"

using namespace elastocal;

namespace {

constexpr double kPi = std::numbers::pi;

ChainSpec reduced_kuka() { return reduce_model(testutil::kuka()).chain; }

/// Real-minus-nominal values of the published identification table (p_z6 is
/// not part of the reduced model).
ParamVector table1_truth(const ChainSpec& chain) {
  ParamVector pi = ParamVector::from_chain(chain);
  const std::map<std::string, double> dev = {
      {"px1", -0.0051},  {"py1", -0.0023},  {"phy1", -0.0049}, {"dq2", 0.0089},     {"py2", -0.0058},
      {"pz2", 3.8028},   {"phy2", -0.0023}, {"dq3", -0.0058},  {"px3", 0.0074},     {"py3", -0.0097},
      {"phy3", -0.0052}, {"dq4", 0.0036},   {"py4", 0.0035},   {"pz4", -0.6424},    {"phy4", -0.0050},
      {"dq5", 0.0063},   {"px5", -0.0046},  {"py5", -0.0057},  {"phy5", 6.762e-4},  {"dq6", 0.0023},
      {"py6", 0.0048},   {"phy6", -0.0041}, {"base_z", 5.5582}, {"tool1_z", -0.3056}, {"tool2_y", 0.4379},
      {"tool2_z", 0.2528}, {"tool3_y", 0.7469}, {"tool3_z", -0.4312}};
  for (const auto& [id, v] : dev) pi.set_deviation(id, v);
  return pi;
}

MeasurementSet simulate(const ChainSpec& chain, const ParamVector& truth, const PosePlan& plan, double sigma,
                        std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  MeasurementSet out;
  for (Eigen::Index k = 0; k < plan.rows(); ++k) {
    const auto poses = forward_kinematics(chain, plan.configuration(k), truth);
    for (std::size_t j = 0; j < poses.size(); ++j) {
      Vector3 p = poses[j].translation;
      if (sigma > 0) p += sigma * Vector3(noise(rng), noise(rng), noise(rng));
      out.push_back({static_cast<std::size_t>(k), j, p});
    }
  }
  return out;
}

JointLimits limits_of(const ChainSpec& c) {
  JointLimits out;
  for (const auto& j : c.joints) out.push_back(j.limits);
  return out;
}

Eigen::MatrixXd planar_measure(const PlanarModel& m, const PosePlan& plan, const Eigen::VectorXd& truth,
                               double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, sigma);
  Eigen::MatrixXd out(plan.rows(), 2);
  for (Eigen::Index k = 0; k < plan.rows(); ++k) {
    out.row(k) = m.position(plan.configuration(k), truth).transpose();
    if (sigma > 0) out.row(k) += Eigen::RowVector2d(noise(rng), noise(rng));
  }
  return out;
}

// n = 3 planar arm, optimal plan of two superposed n3m3 patterns.
PosePlan planar_plan() {
  return superpose({pattern_n3m3({0.2, 1.4, -2.0}, 0.3, -0.7), pattern_n3m3({-1.0, 0.4, 2.5}, 1.1, 0.2)});
}

}  // namespace

TEST(MeasurementCsv, RoundTripIsExact) {
  MeasurementSet m = {{0, 0, Vector3(1.0 / 3.0, -2.5, 1e-7)}, {3, 2, Vector3(400.123456789, 0, -1)}};
  const std::string text = format_measurements_csv(m, {"seed: 3"});
  const MeasurementSet back = parse_measurements_csv(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].config, 3u);
  EXPECT_EQ(back[1].point, 2u);
  EXPECT_EQ(back[0].position, m[0].position);
  EXPECT_EQ(format_measurements_csv(back, {"seed: 3"}), text);
  EXPECT_THROW(parse_measurements_csv("config_index,point_index,x_mm,y_mm,z_mm\n0,1,1,2,3\n"), ParseError);
  EXPECT_THROW(parse_measurements_csv("a,b\n"), ParseError);
}

TEST(Planar, ZeroDeviationsGiveZeroUpdate) {
  const PlanarModel m{{300, 250, 100}};
  std::mt19937_64 rng(1);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(6);
  const auto r = planar_step(m, planar_plan(), planar_measure(m, planar_plan(), zero, 0, rng), zero);
  EXPECT_EQ(r.deviations.norm(), 0.0);
}

TEST(Planar, RecoversSmallDeviations) {
  const PlanarModel m{{300, 250, 100}};
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd truth(6);
    for (int i = 0; i < 3; ++i) truth[i] = 1e-3 * m.lengths[static_cast<std::size_t>(i)] * u(rng);
    for (int i = 3; i < 6; ++i) truth[i] = 1e-3 * u(rng);
    const auto r = planar_identify(m, planar_plan(), planar_measure(m, planar_plan(), truth, 0, rng),
                                   Eigen::VectorXd::Zero(6), 5);
    EXPECT_LE(r.iterations, 5);
    EXPECT_LT((r.deviations - truth).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Planar, JacobianMatchesFiniteDifferences) {
  const PlanarModel m{{300, 250, 100}};
  std::mt19937_64 rng(3);
  const Eigen::VectorXd q = testutil::random_q(rng, 3);
  Eigen::VectorXd d = Eigen::VectorXd::Random(6) * 1e-2;
  const Eigen::MatrixXd j = m.jacobian(q, d);
  for (int i = 0; i < 6; ++i) {
    Eigen::VectorXd dp = d, dm = d;
    dp[i] += 1e-6;
    dm[i] -= 1e-6;
    const Eigen::Vector2d fd = (m.position(q, dp) - m.position(q, dm)) / 2e-6;
    EXPECT_LT((fd - j.col(i)).norm(), 1e-6);
  }
}

TEST(Planar, OptimalPlanDiagonalizesInformation) {
  const PlanarModel m{{300, 250, 100}};
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    std::uniform_real_distribution<double> a(-kPi, kPi);
    const PosePlan plan = superpose({pattern_n3m3({a(rng), a(rng), a(rng)}, a(rng), a(rng)),
                                     pattern_n3m3({a(rng), a(rng), a(rng)}, a(rng), a(rng))});
    ASSERT_TRUE(optimality_residual(plan).pass);
    std::vector<Eigen::MatrixXd> jac;
    for (Eigen::Index k = 0; k < plan.rows(); ++k) jac.push_back(m.jacobian(plan.configuration(k), Eigen::VectorXd::Zero(6)));
    EXPECT_LT(covariance(jac, 1.0).diagonality_defect, 1e-9);
  }
}

TEST(Planar, RankDeficientPlanRaises) {
  const PlanarModel m{{300, 250}};
  PosePlan same;
  same.configurations = Eigen::MatrixXd::Constant(5, 2, 0.4);
  std::mt19937_64 rng(5);
  EXPECT_THROW(planar_step(m, same, planar_measure(m, same, Eigen::VectorXd::Zero(4), 0, rng), Eigen::VectorXd::Zero(4)),
               UnidentifiableError);
}

// One 500-trial experiment: chi-square statistic of each diagonal entry and
// the empirical variances.
struct Experiment {
  Eigen::VectorXd stat;
  Eigen::VectorXd variance;
  Eigen::VectorXd mean;
  Eigen::VectorXd standard_error;  // predicted standard error of the mean
};

Experiment planar_experiment(double sigma, int trials, std::uint64_t seed) {
  const PlanarModel m{{300, 250, 100}};
  const PosePlan plan = planar_plan();
  const Eigen::VectorXd truth = (Eigen::VectorXd(6) << 0.2, -0.1, 0.05, 1e-3, -2e-3, 5e-4).finished();
  std::vector<Eigen::MatrixXd> jac;
  for (Eigen::Index k = 0; k < plan.rows(); ++k) jac.push_back(m.jacobian(plan.configuration(k), truth));
  const Eigen::MatrixXd predicted = covariance(jac, sigma).covariance;
  std::mt19937_64 rng(seed);
  std::vector<Eigen::VectorXd> errors;
  for (int t = 0; t < trials; ++t) {
    const auto r = planar_identify(m, plan, planar_measure(m, plan, truth, sigma, rng), Eigen::VectorXd::Zero(6));
    errors.push_back(r.deviations - truth);
  }
  Experiment e{Eigen::VectorXd(6), Eigen::VectorXd(6), Eigen::VectorXd::Zero(6), Eigen::VectorXd(6)};
  for (const auto& x : errors) e.mean += x / trials;
  for (int i = 0; i < 6; ++i) {
    double ss = 0.0;
    for (const auto& x : errors) ss += (x[i] - e.mean[i]) * (x[i] - e.mean[i]);
    e.stat[i] = ss / predicted(i, i);
    e.variance[i] = ss / (trials - 1);
    e.standard_error[i] = std::sqrt(predicted(i, i) / trials);
  }
  return e;
}

// Each diagonal entry is a 5% chi-square test; over many independent
// experiments the rejection rate must sit at the nominal 5%. The same holds
// for the variance ratio between sigma and 2 sigma against F(n-1, n-1).
TEST(Planar, EmpiricalCovarianceMatchesPrediction) {
  const int trials = 500, experiments = 40;
  const boost::math::chi_squared chi(trials - 1);
  const double lo = boost::math::quantile(chi, 0.025), hi = boost::math::quantile(chi, 0.975);
  const boost::math::fisher_f f(trials - 1, trials - 1);
  const double flo = boost::math::quantile(f, 0.025), fhi = boost::math::quantile(f, 0.975);
  int rejected = 0, checks = 0, ratio_rejected = 0, ratio_checks = 0, biased = 0;
  for (int x = 0; x < experiments; ++x) {
    const Experiment a = planar_experiment(0.05, trials, 1000 + 2 * static_cast<std::uint64_t>(x));
    const Experiment b = planar_experiment(0.10, trials, 1001 + 2 * static_cast<std::uint64_t>(x));
    for (int i = 0; i < 6; ++i) {
      for (double s : {a.stat[i], b.stat[i]}) {
        ++checks;
        rejected += (s < lo || s > hi) ? 1 : 0;
      }
      biased += std::abs(a.mean[i]) > 3.0 * a.standard_error[i] ? 1 : 0;
      biased += std::abs(b.mean[i]) > 3.0 * b.standard_error[i] ? 1 : 0;
      const double ratio = b.variance[i] / (4.0 * a.variance[i]);
      ++ratio_checks;
      ratio_rejected += (ratio < flo || ratio > fhi) ? 1 : 0;
    }
  }
  // Binomial(480, 0.05) has mean 24 and sd 4.8; entries within one experiment
  // are correlated, so allow a wide band.
  EXPECT_GE(rejected, 6) << rejected << " of " << checks;
  EXPECT_LE(rejected, 48) << rejected << " of " << checks;
  EXPECT_LE(ratio_rejected, 30) << ratio_rejected << " of " << ratio_checks;
  // |mean| > 3 standard errors has probability 0.27% per check.
  EXPECT_LE(biased, 5) << biased << " of " << checks;
}

TEST(Planar, MeanErrorWithinThreeStandardErrors) {
  const Experiment e = planar_experiment(0.05, 500, 77);
  for (int i = 0; i < 6; ++i) EXPECT_LT(std::abs(e.mean[i]), 3.0 * e.standard_error[i]) << "parameter " << i;
}

TEST(BaseTool, RecoversBaseAndToolOffsets) {
  const ChainSpec chain = reduced_kuka();
  ParamVector truth = ParamVector::from_chain(chain);
  truth.set_deviation("base_z", 5.5582);  // base z 365.5582 with nominal 360
  truth.set_deviation("tool2_y", 0.4379);
  truth.set_deviation("tool3_z", -0.4312);
  std::mt19937_64 rng(6);
  const PosePlan plan = kuka_optimal_plan();
  const auto ms = simulate(chain, truth, plan, 0.0, rng);
  const auto est = identify_base_tool(ms, chain, plan, ParamVector::from_chain(chain));
  EXPECT_NEAR(est.base_position.z(), 365.5582, 1e-6);
  EXPECT_LT((est.base_rotation - Matrix3::Identity()).norm(), 1e-9);
  EXPECT_LT(est.rms, 1e-8);
  ASSERT_EQ(est.tool_points.size(), 3u);
  EXPECT_LT((est.tool_points[0] - Vector3(0, 0, 90)).norm(), 1e-6);
  EXPECT_LT((est.tool_points[1] - Vector3(0, -77.9423 + 0.4379, -45)).norm(), 1e-6);
  EXPECT_LT((est.tool_points[2] - Vector3(0, 77.9423, -45.4312)).norm(), 1e-6);
  EXPECT_LT((est.tool_transported[1] - est.base_rotation * est.tool_points[1]).norm(), 1e-12);
}

TEST(BaseTool, RotatedBaseConverges) {
  const ChainSpec chain = reduced_kuka();
  ParamVector truth = ParamVector::from_chain(chain);
  truth.set_deviation("base_rx", 0.2);
  truth.set_deviation("base_rz", -0.5);
  truth.set_deviation("base_x", 150.0);
  std::mt19937_64 rng(7);
  const PosePlan plan = kuka_optimal_plan();
  const auto est = identify_base_tool(simulate(chain, truth, plan, 0.0, rng), chain, plan, ParamVector::from_chain(chain));
  EXPECT_LT((est.params.deviations() - truth.deviations()).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(BaseTool, SinglePointSamePoseIsDegenerate) {
  ChainSpec chain = reduced_kuka();
  chain.tools.clear();
  PosePlan plan;
  plan.configurations = Eigen::MatrixXd::Constant(6, 7, 0.3);
  std::mt19937_64 rng(8);
  const ParamVector pi = ParamVector::from_chain(chain);
  EXPECT_THROW(identify_base_tool(simulate(chain, pi, plan, 0.0, rng), chain, plan, pi), DegenerateSetupError);
}

TEST(RobotParams, UnreducedModelNamesEliminableParameters) {
  const ChainSpec full = testutil::kuka();
  const ReductionResult red = reduce_model(full);
  std::set<std::string> eliminated;
  for (const auto& e : red.removed) eliminated.insert(e.param);
  std::mt19937_64 rng(9);
  const ParamVector pi = ParamVector::from_chain(full);
  const PosePlan plan = kuka_optimal_plan();
  try {
    identify_robot_params(simulate(full, pi, plan, 0.0, rng), full, plan, pi);
    FAIL() << "expected UnidentifiableError";
  } catch (const UnidentifiableError& e) {
    ASSERT_FALSE(e.parameters().empty());
    int named = 0;
    for (const auto& p : e.parameters()) named += eliminated.count(p) ? 1 : 0;
    EXPECT_GT(named, 0);
  }
}

TEST(RobotParams, OneStepWithExactFramesIsClose) {
  const ChainSpec chain = reduced_kuka();
  const ParamVector truth = table1_truth(chain);
  ParamVector start = truth;
  for (std::size_t i : start.indices_in(ParamGroup::Robot)) start.set_deviation(i, 0.0);
  std::mt19937_64 rng(10);
  const PosePlan plan = kuka_optimal_plan();
  const auto r = identify_robot_params(simulate(chain, truth, plan, 0.0, rng), chain, plan, start, 0.05);
  EXPECT_EQ(r.estimated.size(), 22u);
  EXPECT_LT(r.rms_history.back(), r.rms_history.front() * 1e-2);
  EXPECT_EQ(r.standard_deviations.size(), 22);
  EXPECT_GT(r.standard_deviations.minCoeff(), 0.0);
}

TEST(Calibrate, NoiseFreeRecoveryOnOptimalPlan) {
  const ChainSpec chain = reduced_kuka();
  const ParamVector truth = table1_truth(chain);
  std::mt19937_64 rng(11);
  const PosePlan plan = kuka_optimal_plan();
  const auto r = calibrate(simulate(chain, truth, plan, 0.0, rng), chain, plan, ParamVector::from_chain(chain));
  EXPECT_TRUE(r.converged) << r.diagnostics;
  // Three corrective updates, then one below the update tolerance.
  EXPECT_LE(r.iterations, 4);
  EXPECT_LT((r.params.deviations() - truth.deviations()).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(r.base_position.z(), 365.5582, 1e-8);
}

TEST(Calibrate, RecoversRandomDeviationsOnRandomPlans) {
  const ChainSpec chain = reduced_kuka();
  std::mt19937_64 rng(12);
  for (int t = 0; t < 5; ++t) {
    const ParamVector truth = testutil::random_deviations(rng, chain, 1e-2);
    const PosePlan plan = random_plan(16, limits_of(chain), 500 + static_cast<std::uint64_t>(t));
    const auto r = calibrate(simulate(chain, truth, plan, 0.0, rng), chain, plan, ParamVector::from_chain(chain));
    EXPECT_TRUE(r.converged);
    EXPECT_LT((r.params.deviations() - truth.deviations()).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Calibrate, CalibratedInputIsAFixpoint) {
  const ChainSpec chain = reduced_kuka();
  const ParamVector truth = table1_truth(chain);
  std::mt19937_64 rng(13);
  const PosePlan plan = kuka_optimal_plan();
  const auto r = calibrate(simulate(chain, truth, plan, 0.0, rng), chain, plan, truth);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_LT((r.params.deviations() - truth.deviations()).norm(), 1e-10);
}

TEST(Calibrate, ResidualDecreasesOnNoisyData) {
  const ChainSpec chain = reduced_kuka();
  const ParamVector truth = table1_truth(chain);
  std::mt19937_64 rng(14);
  const PosePlan plan = kuka_optimal_plan();
  const auto r = calibrate(simulate(chain, truth, plan, 0.05, rng), chain, plan, ParamVector::from_chain(chain));
  EXPECT_TRUE(r.converged);
  ASSERT_GE(r.rms_history.size(), 3u);
  EXPECT_LT(r.rms_history[1], r.rms_history[0]);
  for (std::size_t i = 1; i < r.rms_history.size(); ++i) EXPECT_LE(r.rms_history[i], r.rms_history[i - 1] * (1 + 1e-9));
  EXPECT_NEAR(r.rms_history.back(), 0.05, 0.02);
  EXPECT_GT(r.sigma, 0.0);
}

TEST(Calibrate, TranslatingMeasurementsShiftsOnlyTheBase) {
  const ChainSpec chain = reduced_kuka();
  const ParamVector truth = table1_truth(chain);
  std::mt19937_64 rng(15);
  const PosePlan plan = kuka_optimal_plan();
  MeasurementSet ms = simulate(chain, truth, plan, 0.05, rng);
  const auto a = calibrate(ms, chain, plan, ParamVector::from_chain(chain));
  const Vector3 v(12.5, -40.0, 3.0);
  for (auto& m : ms) m.position += v;
  const auto b = calibrate(ms, chain, plan, ParamVector::from_chain(chain));
  EXPECT_LT((b.base_position - a.base_position - v).norm(), 1e-9);
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    const auto& id = a.params[i].id;
    if (id == "base_x" || id == "base_y" || id == "base_z") continue;
    EXPECT_NEAR(a.params[i].deviation, b.params[i].deviation, 1e-9) << id;
  }
}
