#include "elastocal/ident.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "elastocal/errors.hpp"
#include "elastocal/kinematics.hpp"
#include "elastocal/linalg.hpp"

namespace elastocal {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
  return out;
}

/// Stacked residual (measured - modeled) and parameter Jacobian, one 3-row
/// block per measurement in input order.
struct Linearization {
  Eigen::VectorXd residual;
  Eigen::MatrixXd jacobian;
};

Linearization linearize(const MeasurementSet& ms, const ChainSpec& chain, const PosePlan& plan,
                        const ParamVector& pi, bool with_jacobian) {
  std::map<std::size_t, std::pair<Eigen::VectorXd, Eigen::MatrixXd>> per_config;
  for (const auto& m : ms) {
    if (per_config.count(m.config)) continue;
    const Eigen::VectorXd q = plan.configuration(static_cast<Eigen::Index>(m.config));
    per_config[m.config] = {reference_positions(chain, q, pi),
                            with_jacobian ? jacobian_params(chain, q, pi) : Eigen::MatrixXd()};
  }
  const auto n = static_cast<Eigen::Index>(ms.size());
  Linearization out;
  out.residual.resize(3 * n);
  if (with_jacobian) out.jacobian.resize(3 * n, static_cast<Eigen::Index>(pi.size()));
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& m = ms[static_cast<std::size_t>(k)];
    const auto& [pos, jac] = per_config.at(m.config);
    const auto row = 3 * static_cast<Eigen::Index>(m.point);
    out.residual.segment<3>(3 * k) = m.position - pos.segment<3>(row);
    if (with_jacobian) out.jacobian.middleRows<3>(3 * k) = jac.middleRows<3>(row);
  }
  return out;
}

double rms(const Eigen::VectorXd& r) { return r.size() ? std::sqrt(r.squaredNorm() / static_cast<double>(r.size())) : 0.0; }

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& m, const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(static_cast<Eigen::Index>(cols[i]));
  return out;
}

void apply_update(ParamVector& pi, const std::vector<std::size_t>& cols, const Eigen::VectorXd& delta) {
  for (std::size_t i = 0; i < cols.size(); ++i) {
    pi.set_deviation(cols[i], pi[cols[i]].deviation + delta[static_cast<Eigen::Index>(i)]);
  }
}

std::vector<std::string> names_of(const ParamVector& pi, const std::vector<std::size_t>& cols,
                                  const std::vector<std::size_t>& members) {
  std::vector<std::string> out;
  for (std::size_t m : members) out.push_back(pi[cols[m]].id);
  return out;
}

Pose block_pose(const std::vector<ElementaryTransform>& block, const ParamVector& pi) {
  Pose t;
  const Eigen::VectorXd none;
  for (const auto& e : block) t = t * elementary(e.kind, element_argument(e, none, pi));
  return t;
}

void fill_frames(const ChainSpec& chain, const ParamVector& pi, Vector3& base_p, Matrix3& base_r,
                 std::vector<Vector3>& tools) {
  const Pose base = block_pose(chain.base, pi);
  base_p = base.translation;
  base_r = base.rotation;
  tools.clear();
  for (const auto& block : chain.tools) tools.push_back(block_pose(block, pi).translation);
}

struct Covariance {
  Eigen::MatrixXd matrix;
  double sigma = 0.0;
};

Covariance parameter_covariance(const Eigen::MatrixXd& jac, const Eigen::VectorXd& residual,
                                std::optional<double> sigma) {
  Covariance c;
  const auto dof = jac.rows() - jac.cols();
  c.sigma = sigma ? *sigma : (dof > 0 ? std::sqrt(residual.squaredNorm() / static_cast<double>(dof)) : 0.0);
  const Eigen::MatrixXd info = jac.transpose() * jac;
  c.matrix = c.sigma * c.sigma * info.ldlt().solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
  return c;
}

}  // namespace

MeasurementSet parse_measurements_csv(const std::string& text, const std::string& source) {
  MeasurementSet out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(t);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    auto fail = [&](const std::string& msg) {
      throw ParseError(source + ":" + std::to_string(lineno) + ": " + msg);
    };
    if (!header) {
      const std::vector<std::string> expected{"config_index", "point_index", "x_mm", "y_mm", "z_mm"};
      if (cells != expected) fail("expected header config_index,point_index,x_mm,y_mm,z_mm");
      header = true;
      continue;
    }
    if (cells.size() != 5) fail("expected 5 columns, found " + std::to_string(cells.size()));
    double v[5];
    for (int i = 0; i < 5; ++i) {
      std::size_t used = 0;
      try {
        v[i] = std::stod(cells[static_cast<std::size_t>(i)], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cells[static_cast<std::size_t>(i)].size() || !std::isfinite(v[i])) {
        fail("invalid number '" + cells[static_cast<std::size_t>(i)] + "'");
      }
    }
    if (v[0] < 1 || v[1] < 1 || v[0] != std::floor(v[0]) || v[1] != std::floor(v[1])) {
      fail("indices are 1-based integers");
    }
    out.push_back({static_cast<std::size_t>(v[0]) - 1, static_cast<std::size_t>(v[1]) - 1, Vector3(v[2], v[3], v[4])});
  }
  if (!header) throw ParseError(source + ": missing header line");
  return out;
}

MeasurementSet read_measurements_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_measurements_csv(ss.str(), path.string());
}

std::string format_measurements_csv(const MeasurementSet& ms, const std::vector<std::string>& header_comments) {
  std::ostringstream out;
  for (const auto& c : header_comments) out << "# " << c << "\n";
  out << "config_index,point_index,x_mm,y_mm,z_mm\n";
  char buf[160];
  for (const auto& m : ms) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g\n", m.config + 1, m.point + 1, m.position.x(),
                  m.position.y(), m.position.z());
    out << buf;
  }
  return out.str();
}

void check_measurements(const MeasurementSet& ms, const ChainSpec& chain, const PosePlan& plan) {
  if (static_cast<std::size_t>(plan.joints()) != chain.joint_count()) {
    throw std::invalid_argument("plan has " + std::to_string(plan.joints()) + " joints, chain '" + chain.name +
                                "' has " + std::to_string(chain.joint_count()));
  }
  for (const auto& m : ms) {
    if (m.config >= static_cast<std::size_t>(plan.rows())) {
      throw std::invalid_argument("measurement refers to configuration " + std::to_string(m.config + 1) +
                                  ", plan has " + std::to_string(plan.rows()));
    }
    if (m.point >= chain.reference_count()) {
      throw std::invalid_argument("measurement refers to reference point " + std::to_string(m.point + 1) +
                                  ", chain has " + std::to_string(chain.reference_count()));
    }
  }
  if (ms.empty()) throw std::invalid_argument("no measurements");
}

Eigen::Vector2d PlanarModel::position(const Eigen::VectorXd& q, const Eigen::VectorXd& dev) const {
  const auto n = static_cast<Eigen::Index>(lengths.size());
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
  double theta = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    theta += q[i];
    const double l = lengths[static_cast<std::size_t>(i)] + dev[i];
    const double a = theta + dev[n + i];
    p += l * Eigen::Vector2d(std::cos(a), std::sin(a));
  }
  return p;
}

Eigen::MatrixXd PlanarModel::jacobian(const Eigen::VectorXd& q, const Eigen::VectorXd& dev) const {
  const auto n = static_cast<Eigen::Index>(lengths.size());
  Eigen::MatrixXd j(2, 2 * n);
  double theta = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    theta += q[i];
    const double l = lengths[static_cast<std::size_t>(i)] + dev[i];
    const double a = theta + dev[n + i];
    j.col(i) << std::cos(a), std::sin(a);
    j.col(n + i) << -l * std::sin(a), l * std::cos(a);
  }
  return j;
}

namespace {

struct PlanarSystem {
  Eigen::VectorXd residual;
  Eigen::MatrixXd jacobian;
};

PlanarSystem planar_system(const PlanarModel& model, const PosePlan& plan, const Eigen::MatrixXd& measured,
                           const Eigen::VectorXd& dev) {
  if (measured.rows() != plan.rows() || measured.cols() != 2) {
    throw std::invalid_argument("planar measurements must be m x 2 with one row per configuration");
  }
  if (static_cast<std::size_t>(plan.joints()) != model.joint_count() ||
      static_cast<std::size_t>(dev.size()) != model.parameter_count()) {
    throw std::invalid_argument("planar model, plan and deviation sizes disagree");
  }
  PlanarSystem s;
  s.residual.resize(2 * plan.rows());
  s.jacobian.resize(2 * plan.rows(), dev.size());
  for (Eigen::Index k = 0; k < plan.rows(); ++k) {
    const Eigen::VectorXd q = plan.configuration(k);
    s.residual.segment<2>(2 * k) = measured.row(k).transpose() - model.position(q, dev);
    s.jacobian.middleRows<2>(2 * k) = model.jacobian(q, dev);
  }
  return s;
}

}  // namespace

PlanarResult planar_step(const PlanarModel& model, const PosePlan& plan, const Eigen::MatrixXd& measured,
                         const Eigen::VectorXd& initial) {
  const PlanarSystem s = planar_system(model, plan, measured, initial);
  const LeastSquares ls = solve_least_squares(s.jacobian, s.residual);
  if (ls.rank < s.jacobian.cols()) {
    std::vector<std::string> names;
    const auto n = model.joint_count();
    for (std::size_t i : null_space_members(ls.null_space)) {
      names.push_back(i < n ? "dl" + std::to_string(i + 1) : "dtheta" + std::to_string(i - n + 1));
    }
    throw UnidentifiableError("planar identification is rank deficient: " + join_names(names), names, ls.null_space);
  }
  PlanarResult out;
  out.deviations = initial + ls.x;
  out.condition = ls.condition;
  out.iterations = 1;
  out.rms_history = {rms(s.residual), rms(planar_system(model, plan, measured, out.deviations).residual)};
  return out;
}

PlanarResult planar_identify(const PlanarModel& model, const PosePlan& plan, const Eigen::MatrixXd& measured,
                             const Eigen::VectorXd& initial, int max_iterations, double tolerance) {
  PlanarResult out;
  out.deviations = initial;
  for (int it = 0; it < max_iterations; ++it) {
    const PlanarResult step = planar_step(model, plan, measured, out.deviations);
    if (out.rms_history.empty()) out.rms_history.push_back(step.rms_history.front());
    out.rms_history.push_back(step.rms_history.back());
    const double update = (step.deviations - out.deviations).norm();
    out.deviations = step.deviations;
    out.condition = step.condition;
    out.iterations = it + 1;
    if (update < tolerance) break;
  }
  return out;
}

double residual_rms(const MeasurementSet& ms, const ChainSpec& chain, const PosePlan& plan, const ParamVector& pi) {
  return rms(linearize(ms, chain, plan, pi, false).residual);
}

BaseToolEstimate identify_base_tool(const MeasurementSet& ms, const ChainSpec& chain, const PosePlan& plan,
                                    const ParamVector& current, int max_iterations) {
  check_measurements(ms, chain, plan);
  std::vector<std::size_t> cols = current.indices_in(ParamGroup::Base);
  for (std::size_t i : current.indices_in(ParamGroup::Tool)) {
    if (current[i].unit == ParamUnit::Millimeter) cols.push_back(i);
  }
  if (cols.empty()) throw ModelError("chain '" + chain.name + "' has no base or tool parameters to register");
  BaseToolEstimate out;
  out.params = current;
  for (int it = 0; it < max_iterations; ++it) {
    const Linearization lin = linearize(ms, chain, plan, out.params, true);
    const Eigen::MatrixXd jac = select_columns(lin.jacobian, cols);
    const LeastSquares ls = solve_least_squares(jac, lin.residual);
    if (ls.rank < jac.cols()) {
      const auto names = names_of(current, cols, null_space_members(ls.null_space));
      throw DegenerateSetupError("base/tool frames are not observable from these measurements (rank " +
                                 std::to_string(ls.rank) + " of " + std::to_string(jac.cols()) +
                                 "); free directions involve " + join_names(names));
    }
    apply_update(out.params, cols, ls.x);
    out.iterations = it + 1;
    out.condition = ls.condition;
    if (ls.x.norm() < 1e-12) break;
  }
  out.rms = residual_rms(ms, chain, plan, out.params);
  fill_frames(chain, out.params, out.base_position, out.base_rotation, out.tool_points);
  for (const auto& t : out.tool_points) out.tool_transported.push_back(out.base_rotation * t);
  return out;
}

IdentResult identify_robot_params(const MeasurementSet& ms, const ChainSpec& chain, const PosePlan& plan,
                                  const ParamVector& current, std::optional<double> sigma) {
  check_measurements(ms, chain, plan);
  const std::vector<std::size_t> cols = current.indices_in(ParamGroup::Robot);
  if (cols.empty()) throw ModelError("chain '" + chain.name + "' has no robot parameters");
  const Linearization lin = linearize(ms, chain, plan, current, true);
  const Eigen::MatrixXd jac = select_columns(lin.jacobian, cols);
  const LeastSquares ls = solve_least_squares(jac, lin.residual);
  if (ls.rank < jac.cols()) {
    const auto names = names_of(current, cols, null_space_members(ls.null_space));
    throw UnidentifiableError("robot parameters are not identifiable (rank " + std::to_string(ls.rank) + " of " +
                                  std::to_string(jac.cols()) + "); reduce the model first. Involved: " +
                                  join_names(names),
                              names, ls.null_space);
  }
  IdentResult out;
  out.params = current;
  apply_update(out.params, cols, ls.x);
  out.iterations = 1;
  out.converged = true;
  out.condition = ls.condition;
  out.estimated = cols;
  const Linearization after = linearize(ms, chain, plan, out.params, true);
  out.rms_history = {rms(lin.residual), rms(after.residual)};
  const Covariance c = parameter_covariance(select_columns(after.jacobian, cols), after.residual, sigma);
  out.covariance = c.matrix;
  out.sigma = c.sigma;
  out.standard_deviations = out.covariance.diagonal().cwiseSqrt();
  fill_frames(chain, out.params, out.base_position, out.base_rotation, out.tool_points);
  return out;
}

IdentResult calibrate(const MeasurementSet& ms, const ChainSpec& chain, const PosePlan& plan,
                      const ParamVector& initial, const CalibrationOptions& options) {
  const BaseToolEstimate step1 = identify_base_tool(ms, chain, plan, initial);
  IdentResult out;
  out.params = step1.params;
  std::vector<std::size_t> cols(out.params.size());
  for (std::size_t i = 0; i < cols.size(); ++i) cols[i] = i;
  out.estimated = cols;
  out.rms_history.push_back(step1.rms);
  double update = std::numeric_limits<double>::infinity();
  for (int it = 0; it < options.max_iterations; ++it) {
    const Linearization lin = linearize(ms, chain, plan, out.params, true);
    const LeastSquares ls = solve_least_squares(lin.jacobian, lin.residual);
    if (ls.rank < lin.jacobian.cols()) {
      const auto names = names_of(out.params, cols, null_space_members(ls.null_space));
      throw UnidentifiableError("parameters are not identifiable (rank " + std::to_string(ls.rank) + " of " +
                                    std::to_string(lin.jacobian.cols()) + "); reduce the model first. Involved: " +
                                    join_names(names),
                                names, ls.null_space);
    }
    apply_update(out.params, cols, ls.x);
    out.condition = ls.condition;
    out.iterations = it + 1;
    update = ls.x.norm();
    out.rms_history.push_back(residual_rms(ms, chain, plan, out.params));
    if (update < options.update_tolerance) {
      out.converged = true;
      break;
    }
  }
  if (!out.converged) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "no convergence after %d iterations: last update norm %.3g, residual RMS %.6g mm",
                  out.iterations, update, out.rms_history.back());
    out.diagnostics = buf;
  }
  const Linearization fin = linearize(ms, chain, plan, out.params, true);
  const Covariance c = parameter_covariance(fin.jacobian, fin.residual, options.sigma);
  out.covariance = c.matrix;
  out.sigma = c.sigma;
  out.standard_deviations = out.covariance.diagonal().cwiseSqrt();
  fill_frames(chain, out.params, out.base_position, out.base_rotation, out.tool_points);
  return out;
}

}  // namespace elastocal
