#include "elastocal/simcal.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <Eigen/Dense>

#include "elastocal/chain_io.hpp"
#include "elastocal/errors.hpp"
#include "elastocal/kinematics.hpp"
#include "elastocal/reduction.hpp"

namespace elastocal {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

// Stream ids within a trial.
constexpr std::uint64_t kTruthStream = 0;
std::uint64_t noise_stream(std::size_t plan) { return 1 + 2 * plan; }
std::uint64_t plan_stream(std::size_t plan) { return 2 + 2 * plan; }

JointLimits limits_of(const ChainSpec& c) {
  JointLimits out;
  for (const auto& j : c.joints) out.push_back(j.limits);
  return out;
}

std::string group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::Robot: return "robot";
    case ParamGroup::Base: return "base";
    case ParamGroup::Tool: return "tool";
  }
  return "";
}

bool base_translation(const std::string& id) { return id == "base_x" || id == "base_y" || id == "base_z"; }

Vector3 point_position(const ChainSpec& chain, const Eigen::VectorXd& q, const ParamVector& pi, std::size_t point) {
  return reference_positions(chain, q, pi).segment<3>(3 * static_cast<Eigen::Index>(point));
}

std::string fmt(double v) {
  if (std::isinf(v)) return "inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

nlohmann::json num(double v) {
  if (std::isfinite(v)) return v;
  return fmt(v);
}

struct PlanOutcome {
  bool ok = false;
  std::string message;
  Eigen::VectorXd error;  // estimate - truth
  ParamVector estimate;
  double covariance_trace = kNaN;
  double log_det = kNaN;
  double trajectory_rms = kNaN;
  int iterations = 0;
};

struct TrialOutcome {
  ParamVector truth;
  double uncalibrated_rms = 0.0;
  std::vector<PlanOutcome> plans;
};

double rms_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}

double trajectories_rms(const SimScenario& sc, const ParamVector& reference, const ParamVector& test) {
  std::vector<double> all;
  for (const auto& t : sc.trajectories) {
    const auto e = trajectory_error(sc.chain, reference, test, t, sc.reference_point);
    all.insert(all.end(), e.per_point.begin(), e.per_point.end());
  }
  return rms_of(all);
}

TrialOutcome run_trial(const SimScenario& sc, const ParamVector& nominal, int trial) {
  const auto t = static_cast<std::uint64_t>(trial);
  TrialOutcome out;
  out.truth = sc.generator.draw(nominal, substream_seed(sc.seed, t, kTruthStream));
  out.uncalibrated_rms = trajectories_rms(sc, out.truth, nominal);
  for (std::size_t p = 0; p < sc.plans.size(); ++p) {
    const auto& spec = sc.plans[p];
    PlanOutcome po;
    try {
      const PosePlan plan = spec.fixed ? *spec.fixed
                                       : random_plan(spec.random_rows, limits_of(sc.chain),
                                                     substream_seed(sc.seed, t, plan_stream(p)));
      const auto ms = simulate_measurements(sc.chain, out.truth, plan, sc.sigma,
                                            substream_seed(sc.seed, t, noise_stream(p)));
      CalibrationOptions opt;
      opt.sigma = sc.sigma;
      const auto r = calibrate(ms, sc.chain, plan, nominal, opt);
      if (!r.converged) throw NumericError("calibration did not converge: " + r.diagnostics);
      po.estimate = r.params;
      po.error = r.params.deviations() - out.truth.deviations();
      po.iterations = r.iterations;
      std::vector<Eigen::MatrixXd> jac;
      for (Eigen::Index k = 0; k < plan.rows(); ++k) jac.push_back(jacobian_params(sc.chain, plan.configuration(k), r.params));
      const auto cov = covariance(jac, sc.sigma, r.params.ids());
      po.covariance_trace = cov.covariance.trace();
      po.log_det = cov.log_det_information;
      po.trajectory_rms = trajectories_rms(sc, out.truth, r.params);
      po.ok = true;
    } catch (const std::exception& e) {
      po.message = e.what();
    }
    out.plans.push_back(std::move(po));
  }
  return out;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t substream_seed(std::uint64_t master, std::uint64_t trial, std::uint64_t stream) {
  return splitmix64(splitmix64(splitmix64(master) ^ trial) ^ (stream * 0xd1b54a32d192ed03ULL));
}

ParamVector DeviationGenerator::draw(const ParamVector& params, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ParamVector out = params;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& e = out[i];
    const double sd = e.unit == ParamUnit::Radian ? rotation_std : translation_std;
    double d = sd * normal(rng);
    if (auto it = fixed.find(e.id); it != fixed.end()) d += it->second;
    out.set_deviation(i, d);
  }
  return out;
}

std::map<std::string, double> kuka_reference_offsets() {
  return {{"pz2", 3.8028},     {"pz4", -0.6424},   {"base_z", 5.5582}, {"tool1_z", -0.3056},
          {"tool2_y", 0.4379}, {"tool2_z", 0.2528}, {"tool3_y", 0.7469}, {"tool3_z", -0.4312}};
}

MeasurementSet simulate_measurements(const ChainSpec& chain, const ParamVector& truth, const PosePlan& plan,
                                     double sigma, std::uint64_t seed) {
  if (plan.joints() != static_cast<Eigen::Index>(chain.joint_count()))
    throw std::invalid_argument("plan has " + std::to_string(plan.joints()) + " joints, chain has " +
                                std::to_string(chain.joint_count()));
  if (sigma < 0) throw std::invalid_argument("negative noise level");
  for (Eigen::Index k = 0; k < plan.rows(); ++k) {
    for (std::size_t i = 0; i < chain.joint_count(); ++i) {
      const auto& lim = chain.joints[i].limits;
      const double v = plan.configurations(k, static_cast<Eigen::Index>(i));
      if (lim && (v < lim->first - 1e-12 || v > lim->second + 1e-12))
        throw std::invalid_argument("configuration " + std::to_string(k + 1) + ": joint " + std::to_string(i + 1) +
                                    " outside its limits");
    }
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  MeasurementSet out;
  for (Eigen::Index k = 0; k < plan.rows(); ++k) {
    const Eigen::VectorXd pos = reference_positions(chain, plan.configuration(k), truth);
    for (std::size_t j = 0; j < chain.reference_count(); ++j) {
      Vector3 p = pos.segment<3>(3 * static_cast<Eigen::Index>(j));
      for (int c = 0; c < 3; ++c) p(c) += sigma * noise(rng);
      out.push_back({static_cast<std::size_t>(k), j, p});
    }
  }
  return out;
}

TrajectoryError trajectory_error(const ChainSpec& chain, const ParamVector& reference, const ParamVector& test,
                                 const PosePlan& trajectory, std::size_t point) {
  if (point >= chain.reference_count()) throw std::invalid_argument("reference point out of range");
  TrajectoryError out;
  for (Eigen::Index k = 0; k < trajectory.rows(); ++k) {
    const Eigen::VectorXd q = trajectory.configuration(k);
    out.per_point.push_back((point_position(chain, q, reference, point) - point_position(chain, q, test, point)).norm());
  }
  out.rms = rms_of(out.per_point);
  return out;
}

PosePlan arc_trajectory(const ChainSpec& chain, const Vector3& center, const Vector3& normal, double radius,
                        double start, double end, int samples, const Eigen::VectorXd& seed_q, std::size_t point) {
  if (samples < 2) throw std::invalid_argument("an arc needs at least two samples");
  const ParamVector nominal = ParamVector::from_chain(chain);
  const Vector3 n = normal.normalized();
  Vector3 u = n.unitOrthogonal();
  const Vector3 v = n.cross(u);
  const auto dof = static_cast<Eigen::Index>(chain.joint_count());
  PosePlan plan;
  plan.configurations.resize(samples, dof);
  Eigen::VectorXd q = seed_q;
  for (int s = 0; s < samples; ++s) {
    const double a = start + (end - start) * s / (samples - 1);
    const Vector3 target = center + radius * (std::cos(a) * u + std::sin(a) * v);
    double err = kInf;
    for (int it = 0; it < 200 && err > 1e-10; ++it) {
      const Vector3 e = target - point_position(chain, q, nominal, point);
      err = e.norm();
      const Eigen::MatrixXd jp = jacobian_joints(chain, q, nominal, point).topRows<3>();
      const Eigen::Matrix3d jjt = jp * jp.transpose() + 1e-4 * Eigen::Matrix3d::Identity();
      q += jp.transpose() * jjt.ldlt().solve(e);
      for (Eigen::Index i = 0; i < dof; ++i) {
        const auto& lim = chain.joints[static_cast<std::size_t>(i)].limits;
        if (lim) q(i) = std::clamp(q(i), lim->first, lim->second);
      }
    }
    err = (target - point_position(chain, q, nominal, point)).norm();
    if (err > 1e-9) throw NumericError("arc sample " + std::to_string(s + 1) + " unreachable (" + fmt(err) + " mm)");
    plan.configurations.row(s) = q.transpose();
    plan.labels.push_back("arc:" + std::to_string(s + 1));
  }
  return plan;
}

double improvement_factor(double truth, double baseline, double estimate) {
  const double num = std::abs(truth - baseline);
  if (num == 0.0) return 0.0;
  const double den = std::abs(truth - estimate);
  if (den < 1e-12) return kInf;
  return num / den;
}

ComparisonReport run_comparison(const SimScenario& sc, int jobs) {
  if (sc.trials < 1) throw std::invalid_argument("at least one trial is required");
  if (sc.plans.empty()) throw std::invalid_argument("no plans to compare");
  for (const auto& p : sc.plans)
    if (!p.fixed && p.random_rows == 0) throw std::invalid_argument("plan " + p.name + " is empty");
  const ParamVector nominal = ParamVector::from_chain(sc.chain);
  const auto trials = static_cast<std::size_t>(sc.trials);
  std::vector<TrialOutcome> outcomes(trials);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < trials; t = next++) outcomes[t] = run_trial(sc, nominal, static_cast<int>(t));
  };
  const auto n_threads = static_cast<std::size_t>(std::clamp(jobs, 1, 256));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < std::min(n_threads, trials); ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  const std::size_t np = sc.plans.size();
  const std::size_t npar = nominal.size();
  ComparisonReport rep;
  rep.covariance_trace.assign(np, {});
  rep.trajectory_rms.assign(np, {});
  rep.errors.assign(np, {});
  for (std::size_t p = 0; p < np; ++p) rep.plans.push_back({sc.plans[p].name});

  std::vector<std::vector<double>> sq_error(np, std::vector<double>(npar, 0.0));
  double uncal = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto& o = outcomes[t];
    rep.uncalibrated_rms.push_back(o.uncalibrated_rms);
    uncal += o.uncalibrated_rms;
    for (std::size_t p = 0; p < np; ++p) {
      const auto& po = o.plans[p];
      rep.covariance_trace[p].push_back(po.covariance_trace);
      rep.trajectory_rms[p].push_back(po.trajectory_rms);
      if (!po.ok) {
        rep.failures.push_back({static_cast<int>(t), sc.plans[p].name, po.message});
        rep.errors[p].push_back(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(npar), kNaN));
        continue;
      }
      rep.errors[p].push_back(po.error);
      auto& s = rep.plans[p];
      ++s.successes;
      s.mean_covariance_trace += po.covariance_trace;
      s.mean_log_det_information += po.log_det;
      s.mean_trajectory_rms += po.trajectory_rms;
      s.mean_iterations += po.iterations;
      for (std::size_t i = 0; i < npar; ++i) sq_error[p][i] += po.error(static_cast<Eigen::Index>(i)) * po.error(static_cast<Eigen::Index>(i));
    }
    if (np >= 2 && o.plans[0].ok && o.plans[1].ok) {
      ++rep.dominance_pairs;
      if (o.plans[0].covariance_trace < o.plans[1].covariance_trace) ++rep.dominance_wins;
    }
  }
  rep.mean_uncalibrated_trajectory_rms = uncal / static_cast<double>(trials);
  for (auto& s : rep.plans) {
    if (s.successes == 0) {
      s.mean_covariance_trace = s.mean_log_det_information = s.mean_trajectory_rms = s.mean_iterations = kNaN;
      continue;
    }
    const double k = s.successes;
    s.mean_covariance_trace /= k;
    s.mean_log_det_information /= k;
    s.mean_trajectory_rms /= k;
    s.mean_iterations /= k;
  }

  // Parameter table from the first trial.
  const auto& first = outcomes.front();
  std::vector<int> finite_count(np, 0);
  int finite_vs_second = 0;
  for (std::size_t i = 0; i < npar; ++i) {
    const auto& e = nominal[i];
    ParameterRow row;
    row.id = e.id;
    row.group = group_name(e.group);
    row.unit = e.unit == ParamUnit::Radian ? "rad" : "mm";
    row.in_table = e.group != ParamGroup::Base || base_translation(e.id);
    row.nominal = e.nominal;
    row.truth = first.truth[i].value();
    for (std::size_t p = 0; p < np; ++p) {
      const auto& po = first.plans[p];
      const double est = po.ok ? po.estimate[i].value() : kNaN;
      row.estimated.push_back(est);
      const double f = po.ok ? improvement_factor(row.truth, row.nominal, est) : kNaN;
      row.improvement.push_back(f);
      if (std::isfinite(f)) {
        rep.plans[p].mean_improvement += f;
        ++finite_count[p];
      }
      const int succ = rep.plans[p].successes;
      row.rms_error.push_back(succ ? std::sqrt(sq_error[p][i] / succ) : kNaN);
    }
    if (np >= 2 && first.plans[0].ok && first.plans[1].ok) {
      const double f = improvement_factor(row.truth, row.estimated[1], row.estimated[0]);
      row.improvement_vs_second = f;
      if (std::isfinite(f)) {
        rep.mean_improvement_vs_second += f;
        ++finite_vs_second;
      }
    }
    rep.rows.push_back(std::move(row));
  }
  for (std::size_t p = 0; p < np; ++p)
    rep.plans[p].mean_improvement = finite_count[p] ? rep.plans[p].mean_improvement / finite_count[p] : kNaN;
  rep.mean_improvement_vs_second = finite_vs_second ? rep.mean_improvement_vs_second / finite_vs_second : kNaN;

  for (std::size_t tr = 0; tr < sc.trajectories.size(); ++tr) {
    const auto& traj = sc.trajectories[tr];
    for (Eigen::Index k = 0; k < traj.rows(); ++k) {
      const Eigen::VectorXd q = traj.configuration(k);
      ComparisonReport::Sample s;
      s.trajectory = tr;
      s.index = static_cast<std::size_t>(k);
      s.target = point_position(sc.chain, q, first.truth, sc.reference_point);
      s.uncalibrated = point_position(sc.chain, q, nominal, sc.reference_point);
      for (const auto& po : first.plans)
        s.calibrated.push_back(po.ok ? point_position(sc.chain, q, po.estimate, sc.reference_point)
                                     : Vector3::Constant(kNaN));
      rep.samples.push_back(std::move(s));
    }
  }
  return rep;
}

SimScenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  try {
    SimScenario sc;
    ChainSpec chain = load_chain(resolve(j.at("chain").get<std::string>()));
    if (j.value("reduce", true)) chain = reduce_model(chain).chain;
    sc.chain = chain;
    for (const auto& p : j.at("plans")) {
      ScenarioPlan sp;
      sp.name = p.at("name").get<std::string>();
      if (p.contains("file")) {
        sp.fixed = read_plan_csv(resolve(p.at("file").get<std::string>())).plan;
      } else if (p.contains("random")) {
        const int rows = p.at("random").get<int>();
        if (rows < 1) throw ParseError("plan " + sp.name + ": random row count must be positive");
        sp.random_rows = static_cast<std::size_t>(rows);
      } else {
        throw ParseError("plan " + sp.name + " needs \"file\" or \"random\"");
      }
      sc.plans.push_back(std::move(sp));
    }
    sc.sigma = j.value("sigma", 0.05);
    sc.trials = j.value("trials", 100);
    sc.seed = j.value("seed", std::uint64_t{0});
    if (sc.sigma < 0) throw ParseError("sigma must be non-negative");
    if (sc.trials < 1) throw ParseError("trials must be positive");
    if (chain.name == "kuka-iiwa") sc.generator.fixed = kuka_reference_offsets();
    if (j.contains("deviations")) {
      const auto& d = j.at("deviations");
      sc.generator.rotation_std = d.value("rotation_std", sc.generator.rotation_std);
      sc.generator.translation_std = d.value("translation_std", sc.generator.translation_std);
      if (d.contains("fixed")) sc.generator.fixed = d.at("fixed").get<std::map<std::string, double>>();
    }
    const ParamVector ids = ParamVector::from_chain(chain);
    for (const auto& [id, v] : sc.generator.fixed)
      if (!ids.find(id)) throw ModelError("deviation offset for unknown parameter " + id);
    for (const auto& t : j.value("trajectories", std::vector<std::string>{}))
      sc.trajectories.push_back(read_plan_csv(resolve(t)).plan);
    const int point = j.value("reference_point", 1);
    if (point < 1 || static_cast<std::size_t>(point) > chain.reference_count())
      throw ParseError("reference_point out of range");
    sc.reference_point = static_cast<std::size_t>(point - 1);
    return sc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
}

SimScenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(read_json_file(path), path.parent_path());
}

nlohmann::json report_to_json(const ComparisonReport& rep, const SimScenario& sc) {
  nlohmann::json j;
  j["config"] = {{"chain", sc.chain.name},
                 {"sigma", sc.sigma},
                 {"trials", sc.trials},
                 {"seed", sc.seed},
                 {"reference_point", sc.reference_point + 1},
                 {"deviations",
                  {{"rotation_std", sc.generator.rotation_std},
                   {"translation_std", sc.generator.translation_std},
                   {"fixed", sc.generator.fixed}}}};
  nlohmann::json plans = nlohmann::json::array();
  for (std::size_t p = 0; p < rep.plans.size(); ++p) {
    const auto& s = rep.plans[p];
    const auto& spec = sc.plans[p];
    plans.push_back({{"name", s.name},
                     {"kind", spec.fixed ? "fixed" : "random"},
                     {"configurations", spec.fixed ? static_cast<std::size_t>(spec.fixed->rows()) : spec.random_rows},
                     {"successes", s.successes},
                     {"mean_covariance_trace", num(s.mean_covariance_trace)},
                     {"mean_log_det_information", num(s.mean_log_det_information)},
                     {"mean_trajectory_rms_mm", num(s.mean_trajectory_rms)},
                     {"mean_improvement", num(s.mean_improvement)},
                     {"mean_iterations", num(s.mean_iterations)}});
  }
  j["plans"] = plans;
  j["uncalibrated_trajectory_rms_mm"] = num(rep.mean_uncalibrated_trajectory_rms);
  if (rep.dominance_pairs > 0) {
    j["dominance"] = {{"wins", rep.dominance_wins}, {"pairs", rep.dominance_pairs}};
    j["mean_improvement_vs_second"] = num(rep.mean_improvement_vs_second);
  }
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rep.rows) {
    nlohmann::json est = nlohmann::json::array(), imp = nlohmann::json::array(), err = nlohmann::json::array();
    for (std::size_t p = 0; p < r.estimated.size(); ++p) {
      est.push_back(num(r.estimated[p]));
      imp.push_back(num(r.improvement[p]));
      err.push_back(num(r.rms_error[p]));
    }
    nlohmann::json row = {{"id", r.id},        {"group", r.group},  {"unit", r.unit},
                          {"in_table", r.in_table}, {"nominal", r.nominal}, {"true", r.truth},
                          {"estimated", est},  {"improvement", imp}, {"rms_error", err}};
    if (r.improvement_vs_second) row["improvement_vs_second"] = num(*r.improvement_vs_second);
    rows.push_back(std::move(row));
  }
  j["parameters"] = rows;
  nlohmann::json fails = nlohmann::json::array();
  for (const auto& f : rep.failures) fails.push_back({{"trial", f.trial + 1}, {"plan", f.plan}, {"message", f.message}});
  j["failures"] = fails;
  return j;
}

std::string report_to_csv(const ComparisonReport& rep, const SimScenario& sc) {
  std::ostringstream os;
  os << "# chain: " << sc.chain.name << "\n# sigma_mm: " << fmt(sc.sigma) << "\n# trials: " << sc.trials
     << "\n# seed: " << sc.seed << "\n# values from trial 1; rms_error over all trials\n";
  os << "id,unit,nominal,true";
  for (const auto& p : rep.plans) os << ",estimated_" << p.name;
  for (const auto& p : rep.plans) os << ",improvement_" << p.name;
  if (rep.plans.size() >= 2) os << ",improvement_" << rep.plans[0].name << "_vs_" << rep.plans[1].name;
  for (const auto& p : rep.plans) os << ",rms_error_" << p.name;
  os << "\n";
  for (const auto& r : rep.rows) {
    if (!r.in_table) continue;
    os << r.id << "," << r.unit << "," << fmt(r.nominal) << "," << fmt(r.truth);
    for (double v : r.estimated) os << "," << fmt(v);
    for (double v : r.improvement) os << "," << fmt(v);
    if (rep.plans.size() >= 2) os << "," << (r.improvement_vs_second ? fmt(*r.improvement_vs_second) : "nan");
    for (double v : r.rms_error) os << "," << fmt(v);
    os << "\n";
  }
  return os.str();
}

std::string trajectories_to_csv(const ComparisonReport& rep, const SimScenario& sc) {
  std::ostringstream os;
  os << "# chain: " << sc.chain.name << "\n# reference_point: " << sc.reference_point + 1
     << "\n# positions from trial 1 (mm)\n";
  os << "trajectory,index,target_x,target_y,target_z,uncalibrated_x,uncalibrated_y,uncalibrated_z,"
        "uncalibrated_error";
  for (const auto& p : rep.plans)
    os << "," << p.name << "_x," << p.name << "_y," << p.name << "_z," << p.name << "_error";
  os << "\n";
  for (const auto& s : rep.samples) {
    os << s.trajectory + 1 << "," << s.index + 1;
    auto put = [&](const Vector3& v) {
      os << "," << fmt(v.x()) << "," << fmt(v.y()) << "," << fmt(v.z()) << "," << fmt((v - s.target).norm());
    };
    os << "," << fmt(s.target.x()) << "," << fmt(s.target.y()) << "," << fmt(s.target.z());
    put(s.uncalibrated);
    for (const auto& c : s.calibrated) put(c);
    os << "\n";
  }
  return os.str();
}

}  // namespace elastocal
