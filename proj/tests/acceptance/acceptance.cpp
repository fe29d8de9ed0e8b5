// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include <Eigen/Dense>

#include "elastocal/chain_io.hpp"
#include "elastocal/cli.hpp"
#include "elastocal/doe.hpp"
#include "elastocal/ident.hpp"
#include "elastocal/kinematics.hpp"
#include "elastocal/msa.hpp"
#include "elastocal/reduction.hpp"
#include "elastocal/serial_models.hpp"
#include "elastocal/simcal.hpp"
#include "elastocal/stiffness_io.hpp"
#include "elastocal/vjm.hpp"

using namespace elastocal;
namespace fs = std::filesystem;

namespace {

std::string data(const std::string& name) { return std::string(ELASTOCAL_DATA_DIR) + "/" + name; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int cli(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = cli_main(args, o, e);
  if (out) *out = o.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

JointLimits limits_of(const ChainSpec& c) {
  JointLimits out;
  for (const auto& j : c.joints) out.push_back(j.limits);
  return out;
}

fs::path scratch_dir() {
  const fs::path d = fs::temp_directory_path() / "elastocal-acceptance";
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// 1 ---------------------------------------------------------------------------
Outcome optimal_plan() {
  const fs::path dir = scratch_dir();
  const std::string generated = (dir / "plan.csv").string();
  if (cli({"plan", "generate", "--robot", "kuka-iiwa", "--pattern", "n4m4x2", "--out", generated}) != 0)
    return {false, "plan generate failed"};
  std::string text;
  const int code = cli({"plan", "check", generated, "--tol", "1e-9"}, &text);
  const PlanFile f = read_plan_csv(generated);
  const auto d = parse_decomposition(*f.meta_value("subchains"));
  double worst = optimality_residual(f.plan).max_abs;
  for (std::size_t s = 0; s < d.subchains.size(); ++s)
    worst = std::max(worst, optimality_residual(f.plan, d.columns(s)).max_abs);
  const bool same = slurp(generated) == slurp(data("kuka-optimal-16.csv"));
  const double printed = optimality_residual(read_plan_csv(data("kuka-table3-plan.csv")).plan).max_abs;
  return {code == 0 && worst < 1e-9 && same,
          "max residual " + fmt("%.2e", worst) + " over both subchains and the full chain, plan check exit " +
              std::to_string(code) + (same ? ", matches shipped file" : ", differs from shipped file") +
              "; printed Table 3 plan residual " + fmt("%.3f", printed) + " (reported only)"};
}

// 2 ---------------------------------------------------------------------------
Outcome patterns() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ang(-M_PI, M_PI);
  int failures = 0;
  double worst = 0.0;
  auto check = [&](const PosePlan& p) {
    const auto r = optimality_residual(p, 1e-12);
    worst = std::max(worst, r.max_abs);
    failures += r.pass ? 0 : 1;
  };
  for (int t = 0; t < 1000; ++t) {
    const PosePlan a = pattern_n3m3({ang(rng), ang(rng), ang(rng)}, ang(rng), ang(rng));
    const PosePlan b = pattern_n3m3({ang(rng), ang(rng), ang(rng)}, ang(rng), ang(rng));
    const PosePlan c = pattern_n4m4({ang(rng), ang(rng), ang(rng), ang(rng)}, ang(rng), ang(rng), ang(rng), ang(rng));
    const PosePlan d = pattern_n4m4({ang(rng), ang(rng), ang(rng), ang(rng)}, ang(rng), ang(rng), ang(rng), ang(rng));
    check(a);
    check(c);
    std::vector<std::size_t> order = {2, 0, 1};
    std::vector<std::size_t> order4 = {3, 1, 0, 2};
    std::shuffle(order.begin(), order.end(), rng);
    std::shuffle(order4.begin(), order4.end(), rng);
    check(permute(a, order));
    check(permute(c, order4));
    check(superpose({a, b}));
    check(superpose({c, d}));
  }
  return {failures == 0, std::to_string(6000 - failures) + "/6000 plans pass at 1e-12 (max " + fmt("%.2e", worst) + ")"};
}

// 3 ---------------------------------------------------------------------------
Outcome model_rank() {
  const ChainSpec full = load_chain(data("kuka-iiwa.json"));
  const ChainSpec reduced = reduce_model(full).chain;
  const PosePlan plan = random_plan(50, limits_of(full), 3);
  auto ratio = [&](const ChainSpec& c) {
    const ParamVector pi = ParamVector::from_chain(c);
    Eigen::MatrixXd stacked(0, static_cast<Eigen::Index>(pi.size()));
    for (Eigen::Index k = 0; k < plan.rows(); ++k) {
      const Eigen::MatrixXd j = jacobian_params(c, plan.configuration(k), pi);
      stacked.conservativeResize(stacked.rows() + j.rows(), Eigen::NoChange);
      stacked.bottomRows(j.rows()) = j;
    }
    const Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(stacked).singularValues();
    return s(s.size() - 1) / s(0);
  };
  const double r_red = ratio(reduced), r_full = ratio(full);
  return {r_red > 1e-8 && r_full < 1e-8,
          "reduced " + std::to_string(ParamVector::from_chain(reduced).size()) + " params: smin/smax " +
              fmt("%.3e", r_red) + "; unreduced " + std::to_string(ParamVector::from_chain(full).size()) +
              " params: " + fmt("%.3e", r_full)};
}

// 4 ---------------------------------------------------------------------------
Outcome noise_free_recovery() {
  const ChainSpec chain = reduce_model(load_chain(data("kuka-iiwa.json"))).chain;
  ParamVector truth = ParamVector::from_chain(chain);
  const std::map<std::string, double> dev = {
      {"px1", -0.0051},  {"py1", -0.0023},  {"phy1", -0.0049}, {"dq2", 0.0089},     {"py2", -0.0058},
      {"pz2", 3.8028},   {"phy2", -0.0023}, {"dq3", -0.0058},  {"px3", 0.0074},     {"py3", -0.0097},
      {"phy3", -0.0052}, {"dq4", 0.0036},   {"py4", 0.0035},   {"pz4", -0.6424},    {"phy4", -0.0050},
      {"dq5", 0.0063},   {"px5", -0.0046},  {"py5", -0.0057},  {"phy5", 6.762e-4},  {"dq6", 0.0023},
      {"py6", 0.0048},   {"phy6", -0.0041}, {"base_z", 5.5582}, {"tool1_z", -0.3056}, {"tool2_y", 0.4379},
      {"tool2_z", 0.2528}, {"tool3_y", 0.7469}, {"tool3_z", -0.4312}};
  for (const auto& [id, v] : dev) truth.set_deviation(id, v);
  const PosePlan plan = read_plan_csv(data("kuka-optimal-16.csv")).plan;
  const MeasurementSet ms = simulate_measurements(chain, truth, plan, 0.0, 0);
  const IdentResult r = calibrate(ms, chain, plan, ParamVector::from_chain(chain));
  const double err = (r.params.deviations() - truth.deviations()).cwiseAbs().maxCoeff();
  const auto robot = truth.indices_in(ParamGroup::Robot).size();
  return {r.converged && r.iterations <= 20 && err < 1e-8,
          std::to_string(robot) + " robot + " + std::to_string(truth.size() - robot) +
              " base/tool params, max error " + fmt("%.2e", err) + " after " + std::to_string(r.iterations) +
              " iterations, " + std::to_string(chain.reference_count()) +
              " points (p_z6 is absorbed by the tool z offsets and has no column)"};
}

// 5 ---------------------------------------------------------------------------
Outcome plan_dominance() {
  const SimScenario sc = load_scenario(data("kuka-scenario.json"));
  const int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const ComparisonReport rep = run_comparison(sc, jobs);
  const auto& opt = rep.plans[0];
  const auto& rnd = rep.plans[1];
  const bool ordered = opt.mean_trajectory_rms < rnd.mean_trajectory_rms &&
                       rnd.mean_trajectory_rms < rep.mean_uncalibrated_trajectory_rms;
  const ParamVector pi = ParamVector::from_chain(sc.chain);
  const std::size_t expected_rows = pi.indices_in(ParamGroup::Robot).size() + 3 + pi.indices_in(ParamGroup::Tool).size();
  std::size_t rows = 0;
  bool factors = true;
  for (const auto& r : rep.rows) {
    if (!r.in_table) continue;
    ++rows;
    factors = factors && r.improvement.size() == 2 && r.improvement_vs_second.has_value();
  }
  const bool pass = sc.trials == 100 && rep.dominance_pairs == 100 && rep.dominance_wins >= 95 && ordered &&
                    rows == expected_rows && factors && rep.failures.empty();
  return {pass, "seed " + std::to_string(sc.seed) + ": trace wins " + std::to_string(rep.dominance_wins) + "/" +
                    std::to_string(rep.dominance_pairs) + "; trajectory RMS optimal " +
                    fmt("%.4f", opt.mean_trajectory_rms) + " < random " + fmt("%.4f", rnd.mean_trajectory_rms) +
                    " < none " + fmt("%.3f", rep.mean_uncalibrated_trajectory_rms) + " mm" +
                    (ordered ? "" : " (ORDER VIOLATED)") + "; table " + std::to_string(rows) +
                    " rows (22 robot + 3 base + 9 tool; the published table adds p_z6)"};
}

// 6 ---------------------------------------------------------------------------
struct PlanarRun {
  Eigen::VectorXd variance;
  Eigen::VectorXd stat;
};

PlanarRun planar_run(double sigma, int trials, std::uint64_t seed) {
  const PlanarModel m{{300, 250, 100}};
  const PosePlan plan =
      superpose({pattern_n3m3({0.2, 1.4, -2.0}, 0.3, -0.7), pattern_n3m3({-1.0, 0.4, 2.5}, 1.1, 0.2)});
  const Eigen::VectorXd truth = (Eigen::VectorXd(6) << 0.2, -0.1, 0.05, 1e-3, -2e-3, 5e-4).finished();
  std::vector<Eigen::MatrixXd> jac;
  for (Eigen::Index k = 0; k < plan.rows(); ++k) jac.push_back(m.jacobian(plan.configuration(k), truth));
  const Eigen::MatrixXd predicted = covariance(jac, sigma).covariance;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<Eigen::VectorXd> errors;
  for (int t = 0; t < trials; ++t) {
    Eigen::MatrixXd measured(plan.rows(), 2);
    for (Eigen::Index k = 0; k < plan.rows(); ++k)
      measured.row(k) = m.position(plan.configuration(k), truth).transpose() + Eigen::RowVector2d(noise(rng), noise(rng));
    errors.push_back(planar_identify(m, plan, measured, Eigen::VectorXd::Zero(6)).deviations - truth);
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(6);
  for (const auto& e : errors) mean += e / trials;
  PlanarRun out{Eigen::VectorXd(6), Eigen::VectorXd(6)};
  for (int i = 0; i < 6; ++i) {
    double ss = 0.0;
    for (const auto& e : errors) ss += (e[i] - mean[i]) * (e[i] - mean[i]);
    out.variance[i] = ss / (trials - 1);
    out.stat[i] = ss / predicted(i, i);
  }
  return out;
}

Outcome covariance_consistency() {
  const int trials = 500;
  const std::uint64_t seed = 6;  // fixed before the first run
  const PlanarRun a = planar_run(0.05, trials, substream_seed(seed, 0, 0));
  const PlanarRun b = planar_run(0.10, trials, substream_seed(seed, 0, 1));
  const boost::math::chi_squared chi(trials - 1);
  const double lo = boost::math::quantile(chi, 0.025), hi = boost::math::quantile(chi, 0.975);
  const boost::math::fisher_f f(trials - 1, trials - 1);
  const double flo = boost::math::quantile(f, 0.025), fhi = boost::math::quantile(f, 0.975);
  int bad_chi = 0, bad_ratio = 0;
  std::string worst;
  for (int i = 0; i < 6; ++i) {
    for (double s : {a.stat[i], b.stat[i]})
      if (s < lo || s > hi) {
        ++bad_chi;
        worst += " chi2[" + std::to_string(i) + "]=" + fmt("%.1f", s);
      }
    const double ratio = b.variance[i] / (4.0 * a.variance[i]);
    if (ratio < flo || ratio > fhi) {
      ++bad_ratio;
      worst += " ratio[" + std::to_string(i) + "]=" + fmt("%.3f", ratio);
    }
  }
  return {bad_chi == 0 && bad_ratio == 0,
          "seed " + std::to_string(seed) + ", 500 trials: " + std::to_string(12 - bad_chi) +
              "/12 diagonal chi2 stats in [" + fmt("%.1f", lo) + ", " + fmt("%.1f", hi) + "], " +
              std::to_string(6 - bad_ratio) + "/6 variance ratios var(2s)/4var(s) in [" + fmt("%.3f", flo) + ", " +
              fmt("%.3f", fhi) + "]" + (worst.empty() ? "" : ";" + worst)};
}

// 7 ---------------------------------------------------------------------------
Outcome stiffness_cross_check() {
  const ChainSpec chain = load_chain(data("kuka-iiwa-stiffness.json"));
  const VjmModel v = build_vjm(chain, load_springs(data("kuka-iiwa-springs.json")));
  const ParamVector pi = ParamVector::from_chain(chain);
  const PosePlan poses = random_plan(20, limits_of(chain), 7);
  double worst = 0.0, asym = 0.0, min_eig = INFINITY;
  for (Eigen::Index k = 0; k < poses.rows(); ++k) {
    const Eigen::VectorXd q = poses.configuration(k);
    const Matrix6 kv = cartesian_stiffness_vjm(v, q, pi).stiffness;
    const Matrix6 km = cartesian_stiffness_msa(assemble(msa_from_vjm(v, q, pi)));
    worst = std::max(worst, (kv - km).norm() / kv.norm());
    for (const Matrix6& m : {kv, km}) {
      asym = std::max(asym, (m - m.transpose()).norm() / m.norm());
      const Eigen::SelfAdjointEigenSolver<Matrix6> eig(0.5 * (m + m.transpose()));
      min_eig = std::min(min_eig, eig.eigenvalues()(0) / eig.eigenvalues()(5));
    }
  }
  BeamProperties p{70000.0, 26000.0, 600.0, 250.0, 20000.0, 45000.0, 50000.0};
  MsaModel cantilever;
  cantilever.nodes = {{0, Pose{}}, {1, Pose{Matrix3::Identity(), Vector3(p.L, 0, 0)}}};
  cantilever.beams = {{0, 1, p}};
  cantilever.support = {0, std::nullopt, 0.0};
  cantilever.external = 1;
  const double tip = cartesian_stiffness_msa(assemble(cantilever)).inverse()(1, 1);
  const double expected = std::pow(p.L, 3) / (3 * p.E * p.Iz);
  const double tip_err = std::abs(tip - expected) / expected;
  return {worst < 1e-6 && asym < 1e-9 && min_eig >= 0.0 && tip_err < 1e-9,
          "20 poses: max relative Frobenius gap " + fmt("%.2e", worst) + ", asymmetry " + fmt("%.1e", asym) +
              ", min eigenvalue ratio " + fmt("%.2e", min_eig) + "; cantilever tip compliance error " +
              fmt("%.1e", tip_err)};
}

// 8 ---------------------------------------------------------------------------
Outcome determinism() {
  const fs::path dir = scratch_dir();
  auto twice = [&](const std::string& name, std::vector<std::string> args, const std::string& flag) {
    std::vector<std::string> a = args, b = args;
    a.insert(a.end(), {flag, (dir / (name + "-a")).string()});
    b.insert(b.end(), {flag, (dir / (name + "-b")).string()});
    return cli(a) == 0 && cli(b) == 0;
  };
  std::vector<std::string> bad;
  auto same_file = [&](const std::string& x, const std::string& y) {
    const auto sx = slurp(dir / x);
    if (sx.empty() || sx != slurp(dir / y)) bad.push_back(x);
  };
  const std::string chain = data("kuka-iiwa.json"), plan = data("kuka-optimal-16.csv");
  if (!twice("gen", {"plan", "generate", "--robot", "kuka-iiwa", "--seed", "8"}, "--out") ||
      !twice("rand", {"plan", "random", "--chain", chain, "--seed", "8"}, "--out") ||
      !twice("meas", {"simulate", "measure", "--chain", chain, "--plan", plan, "--seed", "8"}, "--out"))
    return {false, "a seeded command failed"};
  same_file("gen-a", "gen-b");
  same_file("rand-a", "rand-b");
  same_file("meas-a", "meas-b");
  if (cli({"calibrate", "run", "--chain", chain, "--plan", plan, "--measurements", (dir / "meas-a").string(), "--out",
           (dir / "cal-a").string()}) != 0 ||
      cli({"calibrate", "run", "--chain", chain, "--plan", plan, "--measurements", (dir / "meas-b").string(), "--out",
           (dir / "cal-b").string()}) != 0)
    return {false, "calibrate run failed"};
  // The config header names the input path, so compare everything after it.
  auto strip = [&](const std::string& f) {
    auto j = read_json_file(dir / f);
    j.erase("config");
    return j.dump();
  };
  if (strip("cal-a") != strip("cal-b")) bad.push_back("cal");
  const std::string scenario = data("kuka-scenario.json");
  for (const char* jobs : {"1", "8"})
    for (const char* rep : {"x", "y"})
      if (cli({"simulate", "run", scenario, "--trials", "20", "--jobs", jobs, "--out-dir",
               (dir / (std::string("sim") + jobs + rep)).string()}) != 0)
        return {false, "simulate run failed"};
  for (const char* f : {"report.json", "report.csv", "trajectories.csv"}) {
    same_file(std::string("sim1x/") + f, std::string("sim1y/") + f);
    same_file(std::string("sim1x/") + f, std::string("sim8x/") + f);
    same_file(std::string("sim1x/") + f, std::string("sim8y/") + f);
  }
  std::string list;
  for (const auto& b : bad) list += " " + b;
  return {bad.empty(), bad.empty() ? "plan generate/random, simulate measure, calibrate run and simulate run "
                                     "(--jobs 1 and 8, repeated) byte-identical"
                                   : "differences:" + list};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "optimality of the shipped plan", 1.0, optimal_plan},
      {2, "pattern correctness", 5.0, patterns},
      {3, "irreducible-model rank", 5.0, model_rank},
      {4, "noise-free recovery", 10.0, noise_free_recovery},
      {5, "plan dominance", 120.0, plan_dominance},
      {6, "covariance consistency", 60.0, covariance_consistency},
      {7, "stiffness cross-validation", 10.0, stiffness_cross_check},
      {8, "determinism", 600.0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::printf("[%s] %d %s: %s (%.2f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
