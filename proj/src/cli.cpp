#include "elastocal/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <json.hpp>

#include "elastocal/chain_io.hpp"
#include "elastocal/doe.hpp"
#include "elastocal/errors.hpp"
#include "elastocal/ident.hpp"
#include "elastocal/kinematics.hpp"
#include "elastocal/reduction.hpp"
#include "elastocal/serial_models.hpp"
#include "elastocal/simcal.hpp"
#include "elastocal/stiffness_io.hpp"

namespace elastocal {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kDeg = std::numbers::pi / 180.0;

std::string num(double v, const char* format = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::vector<double> split_doubles(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw std::invalid_argument(what + ": '" + item + "' is not a number");
    }
  }
  return out;
}

std::vector<int> split_ints(const std::string& text, const std::string& what) {
  std::vector<int> out;
  for (double v : split_doubles(text, what)) {
    if (v != std::floor(v)) throw std::invalid_argument(what + ": expected integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

Eigen::VectorXd joint_vector_deg(const std::string& text, std::size_t n) {
  const auto v = split_doubles(text, "--q");
  if (v.size() != n)
    throw std::invalid_argument("--q has " + std::to_string(v.size()) + " values, the chain has " +
                                std::to_string(n) + " joints");
  Eigen::VectorXd q(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) q(static_cast<Eigen::Index>(i)) = v[i] * kDeg;
  return q;
}

JointLimits limits_of(const ChainSpec& c) {
  JointLimits out;
  for (const auto& j : c.joints) out.push_back(j.limits);
  return out;
}

JointLimits kuka_limits() {
  JointLimits out;
  for (double deg : {170.0, 120.0, 170.0, 120.0, 170.0, 120.0, 175.0}) out.push_back(std::make_pair(-deg * kDeg, deg * kDeg));
  return out;
}

std::string vec3(const Vector3& v) { return "(" + num(v.x()) + ", " + num(v.y()) + ", " + num(v.z()) + ")"; }

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

void print_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%15.6e", m(i, j));
      out << buf;
    }
    out << "\n";
  }
}

/// Resolved settings of one run, echoed into every output file.
struct RunConfig {
  std::vector<std::pair<std::string, std::string>> entries;

  void add(const std::string& k, const std::string& v) { entries.emplace_back(k, v); }
  std::string csv_header() const {
    std::string s;
    for (const auto& [k, v] : entries) s += "# " + k + ": " + v + "\n";
    return s;
  }
  json to_json() const {
    json j = json::object();
    for (const auto& [k, v] : entries) j[k] = v;
    return j;
  }
};

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-")
    out << text;
  else
    write_text_file(path, text);
}

// ---------------------------------------------------------------------------
// model

struct ModelArgs {
  std::string chain;
  std::string out;
  std::string report;
  std::string q;
  std::string params;
};

int model_validate(const ModelArgs& a, std::ostream& out) {
  const ChainSpec c = load_chain(a.chain);
  const ParamVector pi = ParamVector::from_chain(c);
  out << "chain " << c.name << ": valid\n"
      << "  joints: " << c.joint_count() << "\n"
      << "  parameters: " << pi.size() << " (robot " << pi.indices_in(ParamGroup::Robot).size() << ", base "
      << pi.indices_in(ParamGroup::Base).size() << ", tool " << pi.indices_in(ParamGroup::Tool).size() << ")\n"
      << "  reference points: " << c.reference_count() << "\n";
  return kExitOk;
}

int model_reduce(const ModelArgs& a, std::ostream& out) {
  const ChainSpec c = load_chain(a.chain);
  const ReductionResult r = reduce_model(c);
  json report = reduction_report_to_json(r);
  report["config"] = {{"command", "model reduce"}, {"chain", a.chain}};
  if (!a.out.empty()) save_chain(r.chain, a.out);
  if (!a.report.empty()) write_text_file(a.report, report.dump(2) + "\n");
  out << "chain " << c.name << ": " << r.removed.size() << " parameters eliminated, "
      << ParamVector::from_chain(r.chain).size() << " remain\n";
  for (const auto& e : r.removed) out << "  - " << e.param << " [" << e.rule << "] " << e.detail << "\n";
  return kExitOk;
}

int model_fk(const ModelArgs& a, std::ostream& out) {
  const ChainSpec c = load_chain(a.chain);
  const ParamVector pi = a.params.empty() ? ParamVector::from_chain(c) : load_params(a.params, c);
  const Eigen::VectorXd q = joint_vector_deg(a.q, c.joint_count());
  const Pose flange = flange_pose(c, q, pi);
  out << "flange: " << vec3(flange.translation) << " mm\n";
  const auto poses = forward_kinematics(c, q, pi);
  if (!c.tools.empty())
    for (std::size_t j = 0; j < poses.size(); ++j)
      out << "point " << j + 1 << ": " << vec3(poses[j].translation) << " mm\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// plan

struct PlanArgs {
  std::string robot;
  std::string pattern = "n4m4x2";
  std::optional<std::uint64_t> seed;
  std::string first_joint;
  std::string chain;
  std::string file;
  std::string out;
  std::string subchains;
  double tol = kOptimalityTolerance;
  bool fixed_frame = false;
  std::size_t count = 16;
};

int plan_generate(const PlanArgs& a, std::ostream& out) {
  RunConfig cfg;
  cfg.add("command", "plan generate");
  cfg.add("pattern", a.pattern);
  PlanFile f;
  std::optional<SubchainDecomposition> decomp;
  JointLimits limits;
  std::optional<ChainSpec> chain;
  if (!a.chain.empty()) {
    chain = load_chain(a.chain);
    limits = limits_of(*chain);
    cfg.add("chain", a.chain);
  }
  FreeAngleOptions opt;
  if (a.seed) opt.seed = *a.seed;

  if (a.pattern == "n4m4x2") {
    if (a.robot != "kuka-iiwa") throw std::invalid_argument("pattern n4m4x2 is defined for --robot kuka-iiwa");
    cfg.add("robot", a.robot);
    decomp = kuka_decomposition();
    if (!chain) limits = kuka_limits();
    if (limits.size() != 7) throw ModelError("pattern n4m4x2 needs a 7-joint chain");
    if (a.seed) {
      cfg.add("assignment", "search");
      cfg.add("seed", std::to_string(*a.seed));
      f.plan = solve_free_angles(kuka_symbolic_plan(), limits, opt).plan;
      set_first_joint(f.plan, kuka_reference_first_joint());
    } else {
      cfg.add("assignment", "reference");
      f.plan = kuka_optimal_plan();
    }
    if (!a.first_joint.empty()) {
      std::vector<double> col = split_doubles(a.first_joint, "--first-joint");
      for (double& v : col) v *= kDeg;
      set_first_joint(f.plan, col);
      cfg.add("first_joint_deg", a.first_joint);
    } else {
      cfg.add("first_joint", "reference column");
    }
  } else if (a.pattern == "n3m3" || a.pattern == "n4m4") {
    if (!a.seed) throw std::invalid_argument("planar patterns search their free angles: --seed is required");
    const SymbolicPlan sym = a.pattern == "n3m3" ? symbolic_n3m3() : symbolic_n4m4();
    const std::size_t n = a.pattern == "n3m3" ? 3 : 4;
    if (!chain) limits.assign(n, std::nullopt);
    if (limits.size() != n) throw ModelError("pattern " + a.pattern + " needs a " + std::to_string(n) + "-joint chain");
    cfg.add("seed", std::to_string(*a.seed));
    f.plan = solve_free_angles(sym, limits, opt).plan;
  } else {
    throw std::invalid_argument("unknown pattern '" + a.pattern + "' (n3m3, n4m4, n4m4x2)");
  }
  cfg.add("tolerance", num(opt.tolerance, "%.3g"));
  if (decomp) cfg.add("subchains", format_decomposition(*decomp));
  f.meta = cfg.entries;
  f.joint_names = default_joint_names(static_cast<std::size_t>(f.plan.joints()));
  emit(format_plan_csv(f), a.out, out);
  if (!a.out.empty()) {
    const auto rep = optimality_residual(f.plan);
    out << "wrote " << f.plan.rows() << " configurations to " << a.out << " (residual " << num(rep.max_abs, "%.3g")
        << ")\n";
  }
  return kExitOk;
}

int plan_check(const PlanArgs& a, std::ostream& out) {
  const PlanFile f = read_plan_csv(a.file);
  std::optional<SubchainDecomposition> decomp;
  if (!a.subchains.empty())
    decomp = parse_decomposition(a.subchains);
  else if (auto m = f.meta_value("subchains"))
    decomp = parse_decomposition(*m);
  const auto n = static_cast<int>(f.plan.joints());
  if (decomp) decomp->validate(n);

  bool pass = true;
  auto line = [&](const std::string& name, const OptimalityReport& r) {
    pass = pass && r.pass;
    out << name << ": max |residual| " << num(r.max_abs, "%.3e") << " over " << r.residuals.size() << " pairs, "
        << (r.pass ? "pass" : "FAIL") << "\n";
  };
  out << "plan " << a.file << ": " << f.plan.rows() << " configurations, " << n << " joints, tolerance "
      << num(a.tol, "%.3g") << (a.fixed_frame ? ", fixed-frame pairs included" : "") << "\n";
  if (decomp) {
    for (std::size_t s = 0; s < decomp->subchains.size(); ++s) {
      std::string joints;
      for (int j : decomp->subchains[s]) joints += (joints.empty() ? "" : ",") + (j == 0 ? std::string("v") : std::to_string(j));
      line("subchain " + std::to_string(s + 1) + " (" + joints + ")",
           optimality_residual(f.plan, decomp->columns(s), a.tol, a.fixed_frame));
    }
  }
  line("full chain", optimality_residual(f.plan, a.tol, a.fixed_frame));
  return pass ? kExitOk : kExitCheckFailed;
}

int plan_random(const PlanArgs& a, std::ostream& out) {
  if (!a.seed) throw std::invalid_argument("plan random requires --seed");
  const ChainSpec c = load_chain(a.chain);
  RunConfig cfg;
  cfg.add("command", "plan random");
  cfg.add("chain", a.chain);
  cfg.add("count", std::to_string(a.count));
  cfg.add("seed", std::to_string(*a.seed));
  PlanFile f;
  f.plan = random_plan(a.count, limits_of(c), *a.seed);
  f.meta = cfg.entries;
  f.joint_names = default_joint_names(c.joint_count());
  emit(format_plan_csv(f), a.out, out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// stiffness

struct StiffnessArgs {
  std::string chain;
  std::string springs;
  std::string model;
  std::string q;
  std::string method = "vjm";
  std::string passive;
  std::string out;
};

int stiffness_compute(const StiffnessArgs& a, std::ostream& out) {
  RunConfig cfg;
  cfg.add("command", "stiffness compute");
  cfg.add("method", a.method);
  Matrix6 k;
  json extra = json::object();
  if (a.method == "vjm" || (a.method == "msa" && a.model.empty())) {
    if (a.chain.empty() || a.springs.empty() || a.q.empty())
      throw std::invalid_argument("--chain, --springs and --q are required" +
                                  std::string(a.method == "msa" ? " (or --model)" : ""));
    const ChainSpec c = load_chain(a.chain);
    const VjmModel m = build_vjm(c, load_springs(a.springs));
    const Eigen::VectorXd q = joint_vector_deg(a.q, c.joint_count());
    const ParamVector pi = ParamVector::from_chain(c);
    cfg.add("chain", a.chain);
    cfg.add("springs", a.springs);
    cfg.add("q_deg", a.q);
    if (a.method == "vjm") {
      const std::vector<int> passive = a.passive.empty() ? std::vector<int>{} : split_ints(a.passive, "--passive");
      if (!passive.empty()) cfg.add("passive_joints", a.passive);
      const VjmStiffness s = cartesian_stiffness_vjm(m, q, pi, passive);
      k = s.stiffness;
      extra["locked"] = matrix_json(s.locked);
    } else {
      k = cartesian_stiffness_msa(assemble(msa_from_vjm(m, q, pi)));
    }
  } else if (a.method == "msa") {
    if (!a.passive.empty()) throw std::invalid_argument("--passive applies to --method vjm only");
    cfg.add("model", a.model);
    k = cartesian_stiffness_msa(assemble(load_msa(a.model)));
  } else {
    throw std::invalid_argument("unknown method '" + a.method + "' (vjm, msa)");
  }
  const Eigen::SelfAdjointEigenSolver<Matrix6> eig(0.5 * (k + k.transpose()));
  json j{{"config", cfg.to_json()},
         {"units", "rows/cols (x, y, z, rx, ry, rz); N/mm, N, N mm/rad"},
         {"stiffness", matrix_json(k)},
         {"eigenvalues", matrix_json(eig.eigenvalues().transpose())}};
  for (auto& [key, v] : extra.items()) j[key] = v;
  if (!a.out.empty()) write_text_file(a.out, j.dump(2) + "\n");
  out << "Cartesian stiffness (" << a.method << ")\n";
  print_matrix(out, k);
  return kExitOk;
}

int stiffness_equivalent(const StiffnessArgs& a, std::ostream& out) {
  const ChainSpec c = load_chain(a.chain);
  const VjmModel m = build_vjm(c, load_springs(a.springs));
  const Eigen::VectorXd q = joint_vector_deg(a.q, c.joint_count());
  const MsaModel msa = msa_from_vjm(m, q, ParamVector::from_chain(c));
  json j = msa_to_json(msa);
  j["config"] = {{"command", "stiffness equivalent"}, {"chain", a.chain}, {"springs", a.springs}, {"q_deg", a.q}};
  emit(j.dump(2) + "\n", a.out, out);
  if (!a.out.empty())
    out << "wrote " << msa.nodes.size() << " nodes, " << msa.beams.size() << " beams, " << msa.joints.size()
        << " joints to " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// calibrate / simulate

struct CalibrateArgs {
  std::string chain;
  std::string plan;
  std::string measurements;
  std::string initial;
  std::string out;
  bool no_reduce = false;
  std::optional<double> sigma;
  int max_iterations = 20;
  double tolerance = 1e-10;
};

int calibrate_run(const CalibrateArgs& a, std::ostream& out) {
  ChainSpec c = load_chain(a.chain);
  if (!a.no_reduce) c = reduce_model(c).chain;
  const PosePlan plan = read_plan_csv(a.plan).plan;
  const MeasurementSet ms = read_measurements_csv(a.measurements);
  check_measurements(ms, c, plan);
  const ParamVector initial = a.initial.empty() ? ParamVector::from_chain(c) : load_params(a.initial, c);
  CalibrationOptions opt;
  opt.max_iterations = a.max_iterations;
  opt.update_tolerance = a.tolerance;
  opt.sigma = a.sigma;
  const IdentResult r = calibrate(ms, c, plan, initial, opt);

  RunConfig cfg;
  cfg.add("command", "calibrate run");
  cfg.add("chain", a.chain);
  cfg.add("reduce", a.no_reduce ? "false" : "true");
  cfg.add("plan", a.plan);
  cfg.add("measurements", a.measurements);
  cfg.add("initial", a.initial.empty() ? "nominal" : a.initial);
  cfg.add("max_iterations", std::to_string(a.max_iterations));
  cfg.add("update_tolerance", num(a.tolerance, "%.3g"));
  cfg.add("sigma_mm", a.sigma ? num(*a.sigma) : "estimated");

  json j = params_to_json(r.params);
  j["config"] = cfg.to_json();
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["rms_history_mm"] = r.rms_history;
  j["condition"] = r.condition;
  j["sigma_mm"] = r.sigma;
  if (!r.diagnostics.empty()) j["diagnostics"] = r.diagnostics;
  for (std::size_t k = 0; k < r.estimated.size(); ++k)
    j["params"][r.estimated[k]]["std"] = r.standard_deviations(static_cast<Eigen::Index>(k));
  j["base"] = {{"position_mm", {r.base_position.x(), r.base_position.y(), r.base_position.z()}},
               {"rotation", matrix_json(r.base_rotation)}};
  json tools = json::array();
  for (const auto& t : r.tool_points) tools.push_back({t.x(), t.y(), t.z()});
  j["tool_points_mm"] = tools;
  if (!a.out.empty()) write_text_file(a.out, j.dump(2) + "\n");

  out << "calibration " << (r.converged ? "converged" : "did not converge") << " after " << r.iterations
      << " iterations\n";
  out << "  residual RMS: " << num(r.rms_history.front(), "%.4g") << " -> " << num(r.rms_history.back(), "%.4g")
      << " mm\n";
  out << "  base: " << vec3(r.base_position) << " mm\n";
  for (std::size_t t = 0; t < r.tool_points.size(); ++t) out << "  tool " << t + 1 << ": " << vec3(r.tool_points[t]) << " mm\n";
  if (!r.diagnostics.empty()) out << "  " << r.diagnostics << "\n";
  return r.converged ? kExitOk : kExitNumeric;
}

struct SimulateArgs {
  std::string scenario;
  std::string out_dir;
  int jobs = 1;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  // measure
  std::string chain;
  std::string plan;
  std::string params;
  double sigma = 0.05;
  bool no_reduce = false;
  std::string out;
};

int simulate_run(const SimulateArgs& a, std::ostream& out) {
  SimScenario sc = load_scenario(a.scenario);
  if (a.trials) sc.trials = *a.trials;
  if (a.seed) sc.seed = *a.seed;
  if (a.jobs < 1) throw std::invalid_argument("--jobs must be positive");
  const ComparisonReport rep = run_comparison(sc, a.jobs);

  const fs::path dir = a.out_dir.empty() ? fs::path(".") : fs::path(a.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  json j = report_to_json(rep, sc);
  j["config"]["scenario"] = a.scenario;
  j["config"]["sigma_note"] = "assumed measurement noise level";
  write_text_file(dir / "report.json", j.dump(2) + "\n");
  const std::string head = "# scenario: " + a.scenario + "\n";
  write_text_file(dir / "report.csv", head + report_to_csv(rep, sc));
  write_text_file(dir / "trajectories.csv", head + trajectories_to_csv(rep, sc));

  out << "scenario " << a.scenario << ": " << sc.trials << " trials, sigma " << num(sc.sigma) << " mm, seed "
      << sc.seed << "\n";
  for (const auto& p : rep.plans)
    out << "  " << p.name << ": " << p.successes << " ok, covariance trace " << num(p.mean_covariance_trace, "%.4g")
        << ", trajectory RMS " << num(p.mean_trajectory_rms, "%.4g") << " mm\n";
  out << "  no calibration: trajectory RMS " << num(rep.mean_uncalibrated_trajectory_rms, "%.4g") << " mm\n";
  if (rep.dominance_pairs > 0)
    out << "  " << rep.plans[0].name << " trace below " << rep.plans[1].name << " in " << rep.dominance_wins << "/"
        << rep.dominance_pairs << " trials\n";
  if (!rep.failures.empty()) out << "  " << rep.failures.size() << " identification failures (see report.json)\n";
  out << "wrote report.json, report.csv, trajectories.csv to " << dir.string() << "\n";
  return kExitOk;
}

int simulate_measure(const SimulateArgs& a, std::ostream& out) {
  if (!a.seed) throw std::invalid_argument("simulate measure requires --seed");
  ChainSpec c = load_chain(a.chain);
  if (!a.no_reduce) c = reduce_model(c).chain;
  const ParamVector truth = a.params.empty() ? ParamVector::from_chain(c) : load_params(a.params, c);
  const PosePlan plan = read_plan_csv(a.plan).plan;
  const MeasurementSet ms = simulate_measurements(c, truth, plan, a.sigma, *a.seed);
  const std::vector<std::string> header = {"command: simulate measure", "chain: " + a.chain,
                                           std::string("reduce: ") + (a.no_reduce ? "false" : "true"),
                                           "plan: " + a.plan, "params: " + (a.params.empty() ? "nominal" : a.params),
                                           "sigma_mm: " + num(a.sigma), "seed: " + std::to_string(*a.seed)};
  emit(format_measurements_csv(ms, header), a.out, out);
  return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kinematic calibration, experiment design and stiffness modelling of serial robots", "elastocal"};
  app.require_subcommand(1);
  std::function<int()> action;

  ModelArgs model;
  auto* model_cmd = app.add_subcommand("model", "Validate, reduce or evaluate a chain model");
  model_cmd->require_subcommand(1);
  auto* validate = model_cmd->add_subcommand("validate", "Check a chain file");
  validate->add_option("chain", model.chain, "Chain JSON")->required();
  validate->callback([&] { action = [&] { return model_validate(model, out); }; });
  auto* reduce = model_cmd->add_subcommand("reduce", "Eliminate non-identifiable parameters");
  reduce->add_option("chain", model.chain, "Chain JSON")->required();
  reduce->add_option("--out", model.out, "Reduced chain JSON");
  reduce->add_option("--report", model.report, "Elimination report JSON");
  reduce->callback([&] { action = [&] { return model_reduce(model, out); }; });
  auto* fk = model_cmd->add_subcommand("fk", "Forward kinematics");
  fk->add_option("chain", model.chain, "Chain JSON")->required();
  fk->add_option("--q", model.q, "Joint angles, degrees, comma separated")->required();
  fk->add_option("--params", model.params, "Parameter deviations JSON");
  fk->callback([&] { action = [&] { return model_fk(model, out); }; });

  PlanArgs plan;
  auto* plan_cmd = app.add_subcommand("plan", "Measurement plans");
  plan_cmd->require_subcommand(1);
  auto* generate = plan_cmd->add_subcommand("generate", "Optimal plan from geometric patterns");
  generate->add_option("--robot", plan.robot, "Robot (kuka-iiwa for n4m4x2)");
  generate->add_option("--pattern", plan.pattern, "n3m3, n4m4 or n4m4x2")->capture_default_str();
  generate->add_option("--seed", plan.seed, "Seed of the free-angle search");
  generate->add_option("--first-joint", plan.first_joint, "First-joint column, degrees");
  generate->add_option("--chain", plan.chain, "Chain JSON for joint limits");
  generate->add_option("--out", plan.out, "Plan CSV");
  generate->callback([&] { action = [&] { return plan_generate(plan, out); }; });
  auto* check = plan_cmd->add_subcommand("check", "Optimality residual of a plan");
  check->add_option("plan", plan.file, "Plan CSV")->required();
  check->add_option("--tol", plan.tol, "Residual tolerance")->capture_default_str();
  check->add_option("--subchains", plan.subchains, "Decomposition, e.g. 1,3,5,7|0,2,4,6");
  check->add_flag("--include-fixed-frame", plan.fixed_frame, "Also test pairs against the fixed frame");
  check->callback([&] { action = [&] { return plan_check(plan, out); }; });
  auto* random = plan_cmd->add_subcommand("random", "Uniform random plan within the joint limits");
  random->add_option("--chain", plan.chain, "Chain JSON")->required();
  random->add_option("--count", plan.count, "Configurations")->capture_default_str();
  random->add_option("--seed", plan.seed, "Seed")->required();
  random->add_option("--out", plan.out, "Plan CSV");
  random->callback([&] { action = [&] { return plan_random(plan, out); }; });

  StiffnessArgs stiff;
  auto* stiff_cmd = app.add_subcommand("stiffness", "Cartesian stiffness");
  stiff_cmd->require_subcommand(1);
  auto* compute = stiff_cmd->add_subcommand("compute", "Cartesian stiffness matrix");
  compute->add_option("--method", stiff.method, "vjm or msa")->capture_default_str();
  compute->add_option("--chain", stiff.chain, "Chain JSON");
  compute->add_option("--springs", stiff.springs, "Spring JSON");
  compute->add_option("--q", stiff.q, "Joint angles, degrees");
  compute->add_option("--model", stiff.model, "MSA model JSON (msa only)");
  compute->add_option("--passive", stiff.passive, "Passive joints, 1-based (vjm only)");
  compute->add_option("--out", stiff.out, "Result JSON");
  compute->callback([&] { action = [&] { return stiffness_compute(stiff, out); }; });
  auto* equivalent = stiff_cmd->add_subcommand("equivalent", "Beam-and-joint MSA model of a VJM chain at a pose");
  equivalent->add_option("--chain", stiff.chain, "Chain JSON")->required();
  equivalent->add_option("--springs", stiff.springs, "Spring JSON")->required();
  equivalent->add_option("--q", stiff.q, "Joint angles, degrees")->required();
  equivalent->add_option("--out", stiff.out, "MSA model JSON");
  equivalent->callback([&] { action = [&] { return stiffness_equivalent(stiff, out); }; });

  CalibrateArgs cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "Geometric parameter identification");
  cal_cmd->require_subcommand(1);
  auto* run = cal_cmd->add_subcommand("run", "Identify parameters from measurements");
  run->add_option("--chain", cal.chain, "Chain JSON")->required();
  run->add_option("--plan", cal.plan, "Plan CSV")->required();
  run->add_option("--measurements", cal.measurements, "Measurement CSV")->required();
  run->add_option("--initial", cal.initial, "Starting deviations JSON");
  run->add_option("--out", cal.out, "Result JSON");
  run->add_flag("--no-reduce", cal.no_reduce, "Use the chain as given");
  run->add_option("--sigma", cal.sigma, "Noise level for the covariance (mm)");
  run->add_option("--max-iterations", cal.max_iterations)->capture_default_str();
  run->add_option("--tol", cal.tolerance, "Update-norm tolerance")->capture_default_str();
  run->callback([&] { action = [&] { return calibrate_run(cal, out); }; });

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulated measurements and Monte-Carlo comparisons");
  sim_cmd->require_subcommand(1);
  auto* sim_run = sim_cmd->add_subcommand("run", "Compare plans over seeded trials");
  sim_run->add_option("scenario", sim.scenario, "Scenario JSON")->required();
  sim_run->add_option("--out-dir", sim.out_dir, "Directory for the three report files");
  sim_run->add_option("--jobs", sim.jobs, "Worker threads")->capture_default_str();
  sim_run->add_option("--trials", sim.trials, "Override the trial count");
  sim_run->add_option("--seed", sim.seed, "Override the master seed");
  sim_run->callback([&] { action = [&] { return simulate_run(sim, out); }; });
  auto* measure = sim_cmd->add_subcommand("measure", "Noisy measurements of a plan");
  measure->add_option("--chain", sim.chain, "Chain JSON")->required();
  measure->add_option("--plan", sim.plan, "Plan CSV")->required();
  measure->add_option("--params", sim.params, "True deviations JSON");
  measure->add_option("--sigma", sim.sigma, "Noise std (mm)")->capture_default_str();
  measure->add_option("--seed", sim.seed, "Seed")->required();
  measure->add_flag("--no-reduce", sim.no_reduce, "Use the chain as given");
  measure->add_option("--out", sim.out, "Measurement CSV");
  measure->callback([&] { action = [&] { return simulate_measure(sim, out); }; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    return action();
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const nlohmann::json::exception& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const ModelError& e) {
    err << "model error: " << e.what() << "\n";
    return kExitModel;
  } catch (const UnidentifiableError& e) {
    err << "numeric error: " << e.what() << "\n";
    std::string names;
    for (const auto& p : e.parameters()) names += (names.empty() ? "" : ", ") + p;
    if (!names.empty()) err << "  parameters in the null space: " << names << "\n";
    return kExitNumeric;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace elastocal
