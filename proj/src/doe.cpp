#include "elastocal/doe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "elastocal/errors.hpp"
#include "elastocal/linalg.hpp"

namespace elastocal {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

AffineAngle sym(const std::string& name, double constant = 0.0) {
  AffineAngle a;
  a.constant = constant;
  a.terms[name] = 1.0;
  return a;
}

AffineAngle operator+(AffineAngle a, const AffineAngle& b) {
  a.constant += b.constant;
  for (const auto& [k, v] : b.terms) a.terms[k] += v;
  return a;
}

AffineAngle operator-(AffineAngle a, const AffineAngle& b) {
  a.constant -= b.constant;
  for (const auto& [k, v] : b.terms) a.terms[k] -= v;
  return a;
}

AffineAngle plus(AffineAngle a, double c) {
  a.constant += c;
  return a;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(s);
  while (std::getline(in, cell, sep)) out.push_back(trim(cell));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

/// Sum independent of the order of the terms, so row permutations leave the
/// residuals bit-identical.
double ordered_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double sum = 0.0, carry = 0.0;
  for (double t : terms) {
    const double next = sum + t;
    carry += std::abs(sum) >= std::abs(t) ? (sum - next) + t : (t - next) + sum;
    sum = next;
  }
  return sum + carry;
}

}  // namespace

double AffineAngle::evaluate(const std::map<std::string, double>& bindings) const {
  double v = constant;
  for (const auto& [name, coeff] : terms) {
    if (coeff == 0.0) continue;
    auto it = bindings.find(name);
    if (it == bindings.end()) throw std::invalid_argument("free angle '" + name + "' is not assigned");
    v += coeff * it->second;
  }
  return v;
}

std::vector<std::string> SymbolicPlan::symbols() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& row : cells) {
    for (const auto& c : row) {
      for (const auto& [name, coeff] : c.terms) {
        if (coeff != 0.0 && seen.insert(name).second) out.push_back(name);
      }
    }
  }
  return out;
}

PosePlan SymbolicPlan::evaluate(const std::map<std::string, double>& bindings) const {
  PosePlan p;
  p.configurations.resize(static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(joints()));
  for (std::size_t k = 0; k < rows(); ++k) {
    if (cells[k].size() != joints()) throw std::invalid_argument("ragged symbolic plan");
    for (std::size_t i = 0; i < joints(); ++i) {
      p.configurations(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = cells[k][i].evaluate(bindings);
    }
  }
  p.labels = labels;
  return p;
}

OptimalityReport optimality_residual(const PosePlan& plan, const std::vector<int>& columns, double tolerance,
                                     bool include_fixed_frame) {
  const auto m = plan.rows();
  const auto n = static_cast<Eigen::Index>(columns.size());
  // cumulative(k, i) = S_i for configuration k, S_0 = 0.
  Eigen::MatrixXd cumulative = Eigen::MatrixXd::Zero(m, n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = columns[static_cast<std::size_t>(i)];
    if (c >= plan.joints()) throw std::invalid_argument("plan column " + std::to_string(c) + " out of range");
    for (Eigen::Index k = 0; k < m; ++k) {
      cumulative(k, i + 1) = cumulative(k, i) + (c < 0 ? 0.0 : plan.configurations(k, c));
    }
  }
  OptimalityReport r;
  r.tolerance = tolerance;
  std::vector<double> cosines(static_cast<std::size_t>(m)), sines(static_cast<std::size_t>(m));
  for (Eigen::Index i = 1; i <= n; ++i) {
    for (Eigen::Index j = include_fixed_frame ? 0 : 1; j < i; ++j) {
      PairResidual p{static_cast<int>(i), static_cast<int>(j), 0.0, 0.0};
      for (Eigen::Index k = 0; k < m; ++k) {
        const double d = cumulative(k, i) - cumulative(k, j);
        cosines[static_cast<std::size_t>(k)] = std::cos(d);
        sines[static_cast<std::size_t>(k)] = std::sin(d);
      }
      p.cos_sum = ordered_sum(cosines);
      p.sin_sum = ordered_sum(sines);
      r.max_abs = std::max({r.max_abs, std::abs(p.cos_sum), std::abs(p.sin_sum)});
      r.residuals.push_back(p);
    }
  }
  r.pass = r.max_abs <= tolerance;
  return r;
}

OptimalityReport optimality_residual(const PosePlan& plan, double tolerance, bool include_fixed_frame) {
  std::vector<int> all(static_cast<std::size_t>(plan.joints()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return optimality_residual(plan, all, tolerance, include_fixed_frame);
}

SymbolicPlan symbolic_n3m3(const PatternSymbols& names) {
  const double step = 2.0 * kPi / 3.0;
  SymbolicPlan p;
  const double shifts[] = {0.0, step, -step};
  for (int k = 0; k < 3; ++k) {
    p.cells.push_back({sym(names.alpha + std::to_string(k + 1)), sym(names.beta, shifts[k]),
                       sym(names.gamma, shifts[k])});
    p.labels.push_back("n3m3:" + std::to_string(k + 1));
  }
  return p;
}

PosePlan pattern_n3m3(const std::array<double, 3>& alpha, double beta, double gamma) {
  return symbolic_n3m3().evaluate(
      {{"alpha1", alpha[0]}, {"alpha2", alpha[1]}, {"alpha3", alpha[2]}, {"beta", beta}, {"gamma", gamma}});
}

SymbolicPlan symbolic_n4m4(const PatternSymbols& names) {
  const AffineAngle b1 = sym(names.beta + "1");
  const AffineAngle b2 = sym(names.beta + "2");
  const AffineAngle g = sym(names.gamma);
  const AffineAngle d = sym(names.delta);
  const AffineAngle shifted = d + b1 - b2;
  SymbolicPlan p;
  p.cells = {
      {sym(names.alpha + "1"), b1, g, d},
      {sym(names.alpha + "2"), plus(b1, kPi), g, plus(d, kPi)},
      {sym(names.alpha + "3"), b2, plus(g, kPi), shifted},
      {sym(names.alpha + "4"), plus(b2, kPi), plus(g, kPi), plus(shifted, kPi)},
  };
  for (int k = 1; k <= 4; ++k) p.labels.push_back("n4m4:" + std::to_string(k));
  return p;
}

PosePlan pattern_n4m4(const std::array<double, 4>& alpha, double beta1, double beta2, double gamma,
                      double delta) {
  return symbolic_n4m4().evaluate({{"alpha1", alpha[0]},
                                   {"alpha2", alpha[1]},
                                   {"alpha3", alpha[2]},
                                   {"alpha4", alpha[3]},
                                   {"beta1", beta1},
                                   {"beta2", beta2},
                                   {"gamma", gamma},
                                   {"delta", delta}});
}

PosePlan superpose(const std::vector<PosePlan>& plans) {
  Eigen::Index n = -1, m = 0;
  for (const auto& p : plans) {
    if (p.rows() == 0) continue;
    if (n >= 0 && p.joints() != n) {
      throw std::invalid_argument("cannot superpose plans with " + std::to_string(n) + " and " +
                                  std::to_string(p.joints()) + " joints");
    }
    n = p.joints();
    m += p.rows();
  }
  PosePlan out;
  out.configurations.resize(m, std::max<Eigen::Index>(n, 0));
  Eigen::Index row = 0;
  for (const auto& p : plans) {
    if (p.rows() == 0) continue;
    out.configurations.middleRows(row, p.rows()) = p.configurations;
    for (Eigen::Index k = 0; k < p.rows(); ++k) {
      out.labels.push_back(static_cast<std::size_t>(k) < p.labels.size() ? p.labels[static_cast<std::size_t>(k)] : "");
    }
    row += p.rows();
  }
  return out;
}

SymbolicPlan superpose(const std::vector<SymbolicPlan>& plans) {
  SymbolicPlan out;
  for (const auto& p : plans) {
    if (p.rows() == 0) continue;
    if (out.rows() > 0 && p.joints() != out.joints()) {
      throw std::invalid_argument("cannot superpose plans with " + std::to_string(out.joints()) + " and " +
                                  std::to_string(p.joints()) + " joints");
    }
    for (std::size_t k = 0; k < p.rows(); ++k) {
      out.cells.push_back(p.cells[k]);
      out.labels.push_back(k < p.labels.size() ? p.labels[k] : "");
    }
  }
  return out;
}

PosePlan permute(const PosePlan& plan, const std::vector<std::size_t>& order) {
  if (order.size() != static_cast<std::size_t>(plan.rows())) throw std::invalid_argument("permutation size mismatch");
  PosePlan out;
  out.configurations.resize(plan.rows(), plan.joints());
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (order[k] >= order.size()) throw std::invalid_argument("permutation index out of range");
    out.configurations.row(static_cast<Eigen::Index>(k)) = plan.configurations.row(static_cast<Eigen::Index>(order[k]));
    if (!plan.labels.empty()) out.labels.push_back(plan.labels[order[k]]);
  }
  return out;
}

void SubchainDecomposition::validate(int joint_count) const {
  std::vector<int> seen(static_cast<std::size_t>(joint_count) + 1, 0);
  for (std::size_t s = 0; s < subchains.size(); ++s) {
    const auto& sc = subchains[s];
    for (std::size_t c = 0; c < sc.size(); ++c) {
      const int j = sc[c];
      if (j == 0) {
        if (c != 0) throw std::invalid_argument("sub-chain " + std::to_string(s + 1) + ": virtual joint must lead");
        continue;
      }
      if (j < 0 || j > joint_count) {
        throw std::invalid_argument("sub-chain " + std::to_string(s + 1) + ": joint " + std::to_string(j) +
                                    " out of range");
      }
      ++seen[static_cast<std::size_t>(j)];
    }
  }
  for (int j = 1; j <= joint_count; ++j) {
    if (seen[static_cast<std::size_t>(j)] == 0) {
      throw std::invalid_argument("joint " + std::to_string(j) + " is covered by no sub-chain");
    }
    if (seen[static_cast<std::size_t>(j)] > 1) {
      throw std::invalid_argument("joint " + std::to_string(j) + " appears in more than one sub-chain");
    }
  }
}

std::vector<int> SubchainDecomposition::columns(std::size_t s) const {
  std::vector<int> out;
  for (int j : subchains.at(s)) out.push_back(j - 1);
  return out;
}

SymbolicPlan combine_subchains(const SubchainDecomposition& decomp, const std::vector<SymbolicPlan>& subplans,
                               int joint_count) {
  decomp.validate(joint_count);
  if (subplans.size() != decomp.subchains.size()) {
    throw std::invalid_argument("expected " + std::to_string(decomp.subchains.size()) + " sub-plans, got " +
                                std::to_string(subplans.size()));
  }
  for (std::size_t s = 0; s < subplans.size(); ++s) {
    if (subplans[s].rows() == 0) throw std::invalid_argument("sub-plan " + std::to_string(s + 1) + " is empty");
    if (subplans[s].joints() != decomp.subchains[s].size()) {
      throw std::invalid_argument("sub-plan " + std::to_string(s + 1) + " has " +
                                  std::to_string(subplans[s].joints()) + " columns, sub-chain has " +
                                  std::to_string(decomp.subchains[s].size()));
    }
  }
  SymbolicPlan out;
  std::vector<std::size_t> idx(subplans.size(), 0);
  while (true) {
    std::vector<AffineAngle> row(static_cast<std::size_t>(joint_count));
    std::string label;
    for (std::size_t s = 0; s < subplans.size(); ++s) {
      const auto& sc = decomp.subchains[s];
      for (std::size_t c = 0; c < sc.size(); ++c) {
        if (sc[c] > 0) row[static_cast<std::size_t>(sc[c] - 1)] = subplans[s].cells[idx[s]][c];
      }
      if (s > 0) label += " x ";
      label += std::to_string(idx[s] + 1);
    }
    out.cells.push_back(std::move(row));
    out.labels.push_back(label);
    // Odometer with the first sub-chain outermost.
    std::size_t s = subplans.size();
    while (s > 0) {
      --s;
      if (++idx[s] < subplans[s].rows()) break;
      idx[s] = 0;
      if (s == 0) return out;
    }
  }
}

double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

namespace {

struct Score {
  double violation = 0.0;
  double residual = 0.0;
};

constexpr double kViolationTol = 1e-12;

bool better(const Score& a, const Score& b) {
  if (a.violation < b.violation - kViolationTol) return true;
  if (a.violation > b.violation + kViolationTol) return false;
  return a.residual < b.residual;
}

class FreeAngleSearch {
 public:
  FreeAngleSearch(const SymbolicPlan& plan, const JointLimits& limits, const FreeAngleOptions& opt)
      : plan_(plan), limits_(limits), opt_(opt), symbols_(plan.symbols()) {
    if (limits_.size() != plan_.joints()) {
      throw std::invalid_argument("plan has " + std::to_string(plan_.joints()) + " joints, limits given for " +
                                  std::to_string(limits_.size()));
    }
    for (double g = -kPi; g < kPi - 1e-12; g += opt_.grid_step) grid_.push_back(g);
  }

  FreeAngleSolution run() {
    std::mt19937_64 rng(opt_.seed);
    std::uniform_int_distribution<std::size_t> pick(0, grid_.size() - 1);
    std::map<std::string, double> best_b;
    Score best{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    for (int attempt = 0; attempt <= opt_.restarts; ++attempt) {
      std::map<std::string, double> b;
      for (const auto& s : symbols_) {
        auto it = opt_.initial.find(s);
        b[s] = attempt == 0 && it != opt_.initial.end() ? it->second : grid_[pick(rng)];
      }
      Score sc = score(b);
      if (!solved(sc)) sc = grid_search(b, sc);
      if (!solved(sc) && sc.violation <= kViolationTol) sc = descend(b, sc);
      if (better(sc, best)) {
        best = sc;
        best_b = b;
      }
      if (solved(best)) break;
    }
    if (!solved(best)) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "(best residual %.3g, limit violation %.3g rad)", best.residual, best.violation);
      throw NoSolutionError(
          std::string("no free-angle assignment satisfies the joint limits and the optimality residual ") + buf,
          best.residual);
    }
    FreeAngleSolution out;
    out.bindings = best_b;
    out.plan = concrete(best_b);
    // Snap values sitting on a limit up to rounding back inside it.
    for (Eigen::Index i = 0; i < out.plan.joints(); ++i) {
      if (const auto& lim = limits_[static_cast<std::size_t>(i)]) {
        out.plan.configurations.col(i) = out.plan.configurations.col(i).cwiseMax(lim->first).cwiseMin(lim->second);
      }
    }
    out.report = optimality_residual(out.plan, opt_.tolerance);
    out.limit_violation = best.violation;
    return out;
  }

 private:
  bool solved(const Score& s) const { return s.violation <= kViolationTol && s.residual <= opt_.tolerance; }

  PosePlan concrete(const std::map<std::string, double>& b) const {
    PosePlan p = plan_.evaluate(b);
    p.configurations = p.configurations.unaryExpr([](double a) { return wrap_angle(a); });
    return p;
  }

  Score score(const std::map<std::string, double>& b) const {
    const PosePlan p = concrete(b);
    Score s;
    for (Eigen::Index k = 0; k < p.rows(); ++k) {
      for (Eigen::Index i = 0; i < p.joints(); ++i) {
        const auto& lim = limits_[static_cast<std::size_t>(i)];
        if (!lim) continue;
        const double a = p.configurations(k, i);
        s.violation += std::max({0.0, lim->first - a, a - lim->second});
      }
    }
    s.residual = optimality_residual(p, opt_.tolerance).max_abs;
    return s;
  }

  Score grid_search(std::map<std::string, double>& b, Score current) const {
    for (int sweep = 0; sweep < opt_.max_sweeps; ++sweep) {
      bool improved = false;
      for (const auto& s : symbols_) {
        const double keep = b[s];
        double best_v = keep;
        for (double g : grid_) {
          b[s] = g;
          const Score sc = score(b);
          if (better(sc, current)) {
            current = sc;
            best_v = g;
            improved = true;
          }
        }
        b[s] = best_v;
        if (solved(current)) return current;
      }
      if (!improved) break;
    }
    return current;
  }

  Score descend(std::map<std::string, double>& b, Score current) const {
    for (double step = opt_.grid_step / 2.0; step > 1e-13; step /= 2.0) {
      bool moved = true;
      while (moved) {
        moved = false;
        for (const auto& s : symbols_) {
          for (double dir : {1.0, -1.0}) {
            const double keep = b[s];
            b[s] = keep + dir * step;
            const Score sc = score(b);
            if (better(sc, current)) {
              current = sc;
              moved = true;
            } else {
              b[s] = keep;
            }
          }
        }
        if (solved(current)) return current;
      }
    }
    return current;
  }

  const SymbolicPlan& plan_;
  const JointLimits& limits_;
  const FreeAngleOptions& opt_;
  std::vector<std::string> symbols_;
  std::vector<double> grid_;
};

}  // namespace

FreeAngleSolution solve_free_angles(const SymbolicPlan& plan, const JointLimits& limits,
                                    const FreeAngleOptions& options) {
  return FreeAngleSearch(plan, limits, options).run();
}

CovarianceReport covariance(const std::vector<Eigen::MatrixXd>& jacobians, double sigma,
                            const std::vector<std::string>& names) {
  if (jacobians.empty()) throw std::invalid_argument("covariance needs at least one Jacobian");
  const Eigen::Index p = jacobians.front().cols();
  Eigen::Index rows = 0;
  for (const auto& j : jacobians) {
    if (j.cols() != p) throw std::invalid_argument("Jacobians have different column counts");
    rows += j.rows();
  }
  Eigen::MatrixXd stacked(rows, p);
  Eigen::Index r = 0;
  for (const auto& j : jacobians) {
    stacked.middleRows(r, j.rows()) = j;
    r += j.rows();
  }
  const LeastSquares ls = solve_least_squares(stacked, Eigen::VectorXd::Zero(rows));
  if (ls.rank < p) {
    std::vector<std::string> members;
    for (std::size_t i : null_space_members(ls.null_space)) {
      members.push_back(i < names.size() ? names[i] : "#" + std::to_string(i));
    }
    std::string list;
    for (const auto& m : members) list += (list.empty() ? "" : ", ") + m;
    throw UnidentifiableError("information matrix has rank " + std::to_string(ls.rank) + " of " +
                                  std::to_string(p) + "; not identifiable: " + list,
                              members, ls.null_space);
  }
  CovarianceReport out;
  out.information = stacked.transpose() * stacked;
  out.condition = ls.condition;
  const Eigen::LLT<Eigen::MatrixXd> llt(out.information);
  if (llt.info() != Eigen::Success) throw NumericError("information matrix is not positive definite");
  out.log_det_information = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  out.covariance = sigma * sigma * llt.solve(Eigen::MatrixXd::Identity(p, p));
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      if (i == j) continue;
      const double scale = std::sqrt(out.information(i, i) * out.information(j, j));
      out.diagonality_defect = std::max(out.diagonality_defect, std::abs(out.information(i, j)) / scale);
    }
  }
  return out;
}

PosePlan random_plan(std::size_t m, const JointLimits& limits, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PosePlan p;
  p.configurations.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(limits.size()));
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t i = 0; i < limits.size(); ++i) {
      const double lo = limits[i] ? limits[i]->first : -kPi;
      const double hi = limits[i] ? limits[i]->second : kPi;
      p.configurations(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = lo + (hi - lo) * unit(rng);
    }
    p.labels.push_back("random:" + std::to_string(k + 1));
  }
  return p;
}

SubchainDecomposition kuka_decomposition() { return {{{1, 3, 5, 7}, {0, 2, 4, 6}}}; }

SymbolicPlan kuka_symbolic_plan() {
  const SymbolicPlan outer = symbolic_n4m4({"alpha", "beta", "gamma", "delta"});
  const SymbolicPlan inner = symbolic_n4m4({"virtual", "epsilon", "chi", "phi"});
  return combine_subchains(kuka_decomposition(), {outer, inner}, 7);
}

std::map<std::string, double> kuka_reference_assignment() {
  return {{"alpha1", 0.0},
          {"alpha2", 0.0},
          {"alpha3", 0.0},
          {"alpha4", 0.0},
          {"epsilon1", -90.0 * kDeg},
          {"epsilon2", -90.0 * kDeg},
          {"beta1", -90.0 * kDeg},
          {"beta2", -130.0 * kDeg},
          {"chi", -110.0 * kDeg},
          {"gamma", -160.0 * kDeg},
          {"phi", -110.0 * kDeg},
          {"delta", -170.0 * kDeg}};
}

std::vector<double> kuka_reference_first_joint() {
  const double deg[] = {-20, 40, 135, -140, 20, -45, -140, -140, -165, 165, 0, 10, 165, -160, 0, -15};
  std::vector<double> out;
  for (double d : deg) out.push_back(d * kDeg);
  return out;
}

void set_first_joint(PosePlan& plan, const std::vector<double>& column) {
  if (column.size() != static_cast<std::size_t>(plan.rows())) {
    throw std::invalid_argument("first-joint column has " + std::to_string(column.size()) + " values, plan has " +
                                std::to_string(plan.rows()) + " rows");
  }
  for (Eigen::Index k = 0; k < plan.rows(); ++k) plan.configurations(k, 0) = column[static_cast<std::size_t>(k)];
}

PosePlan kuka_optimal_plan() {
  PosePlan p = kuka_symbolic_plan().evaluate(kuka_reference_assignment());
  p.configurations = p.configurations.unaryExpr([](double a) { return wrap_angle(a); });
  set_first_joint(p, kuka_reference_first_joint());
  return p;
}

std::optional<std::string> PlanFile::meta_value(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return v;
  }
  return std::nullopt;
}

std::vector<std::string> default_joint_names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= n; ++i) out.push_back("q" + std::to_string(i));
  return out;
}

PlanFile parse_plan_csv(const std::string& text, const std::string& source) {
  PlanFile f;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool has_label = false;
  std::vector<std::vector<double>> rows;
  auto fail = [&](const std::string& msg) { throw ParseError(source + ":" + std::to_string(lineno) + ": " + msg); };
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      const std::string body = trim(t.substr(1));
      const auto colon = body.find(':');
      if (colon != std::string::npos) f.meta.emplace_back(trim(body.substr(0, colon)), trim(body.substr(colon + 1)));
      continue;
    }
    auto cells = split(t, ',');
    if (f.joint_names.empty()) {
      if (!cells.empty() && cells.back() == "label") {
        has_label = true;
        cells.pop_back();
      }
      if (cells.empty()) fail("header names no joints");
      f.joint_names = cells;
      continue;
    }
    const std::size_t expected = f.joint_names.size() + (has_label ? 1 : 0);
    if (cells.size() != expected && !(has_label && cells.size() == f.joint_names.size())) {
      fail("expected " + std::to_string(expected) + " columns, found " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    for (std::size_t i = 0; i < f.joint_names.size(); ++i) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cells[i], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cells[i].size() || cells[i].empty() || !std::isfinite(v)) {
        fail("column '" + f.joint_names[i] + "': invalid angle '" + cells[i] + "'");
      }
      row.push_back(v * kDeg);
    }
    rows.push_back(row);
    f.plan.labels.push_back(has_label && cells.size() == expected ? cells.back() : "");
  }
  if (f.joint_names.empty()) throw ParseError(source + ": missing header line");
  f.plan.configurations.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(f.joint_names.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t i = 0; i < rows[k].size(); ++i) {
      f.plan.configurations(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = rows[k][i];
    }
  }
  if (std::all_of(f.plan.labels.begin(), f.plan.labels.end(), [](const auto& l) { return l.empty(); })) {
    f.plan.labels.clear();
  }
  return f;
}

PlanFile read_plan_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_plan_csv(ss.str(), path.string());
}

std::string format_plan_csv(const PlanFile& file) {
  std::ostringstream out;
  for (const auto& [k, v] : file.meta) out << "# " << k << ": " << v << "\n";
  const auto names =
      file.joint_names.empty() ? default_joint_names(static_cast<std::size_t>(file.plan.joints())) : file.joint_names;
  const bool labels = !file.plan.labels.empty();
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  if (labels) out << ",label";
  out << "\n";
  char buf[64];
  for (Eigen::Index k = 0; k < file.plan.rows(); ++k) {
    for (Eigen::Index i = 0; i < file.plan.joints(); ++i) {
      double deg = file.plan.configurations(k, i) / kDeg;
      // Keep round angles round in the file.
      if (std::abs(deg - std::round(deg)) < 1e-9) deg = std::round(deg);
      if (deg == 0.0) deg = 0.0;
      std::snprintf(buf, sizeof buf, "%.12g", deg);
      out << (i ? "," : "") << buf;
    }
    if (labels) out << "," << file.plan.labels[static_cast<std::size_t>(k)];
    out << "\n";
  }
  return out.str();
}

SubchainDecomposition parse_decomposition(const std::string& text) {
  SubchainDecomposition d;
  for (const auto& part : split(text, '|')) {
    std::vector<int> sc;
    for (const auto& cell : split(part, ',')) {
      try {
        std::size_t used = 0;
        sc.push_back(std::stoi(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ParseError("sub-chain list: invalid joint index '" + cell + "'");
      }
    }
    d.subchains.push_back(sc);
  }
  return d;
}

std::string format_decomposition(const SubchainDecomposition& decomp) {
  std::string out;
  for (std::size_t s = 0; s < decomp.subchains.size(); ++s) {
    if (s) out += "|";
    for (std::size_t c = 0; c < decomp.subchains[s].size(); ++c) {
      if (c) out += ",";
      out += std::to_string(decomp.subchains[s][c]);
    }
  }
  return out;
}

}  // namespace elastocal
