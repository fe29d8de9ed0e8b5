#include "elastocal/linalg.hpp"

#include <Eigen/Dense>

#include "elastocal/errors.hpp"

namespace elastocal {

LeastSquares solve_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double tol) {
  if (a.rows() != b.size()) throw std::invalid_argument("least squares: row count mismatch");
  const Eigen::Index n = a.cols();
  Eigen::VectorXd scale(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double c = a.col(k).norm();
    scale[k] = c > 0.0 ? 1.0 / c : 1.0;
  }
  const Eigen::MatrixXd as = a * scale.asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(as, Eigen::ComputeThinU | Eigen::ComputeFullV);
  LeastSquares out;
  out.singular_values = svd.singularValues();
  const double smax = out.singular_values.size() > 0 ? out.singular_values[0] : 0.0;
  for (Eigen::Index i = 0; i < out.singular_values.size(); ++i) {
    if (out.singular_values[i] > tol * smax) ++out.rank;
  }
  const Eigen::Index r = out.rank;
  out.condition = r == n && r > 0 ? smax / out.singular_values[r - 1] : std::numeric_limits<double>::infinity();

  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd ub = svd.matrixU().leftCols(r).transpose() * b;
  for (Eigen::Index i = 0; i < r; ++i) y[i] = ub[i] / out.singular_values[i];
  out.x = scale.asDiagonal() * (svd.matrixV().leftCols(r) * y.head(r));

  if (r < n) {
    Eigen::MatrixXd ns = scale.asDiagonal() * svd.matrixV().rightCols(n - r);
    // Back to an orthonormal basis in the original coordinates.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(ns);
    out.null_space = qr.householderQ() * Eigen::MatrixXd::Identity(n, n - r);
  } else {
    out.null_space.resize(n, 0);
  }
  return out;
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, const std::string& what, double tol) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double lmax = ev.cwiseAbs().maxCoeff();
  if (llt.info() == Eigen::Success && ev.minCoeff() > tol * lmax) {
    return llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
  }
  std::vector<Eigen::Index> bad;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] <= tol * lmax) bad.push_back(i);
  }
  Eigen::MatrixXd dirs(m.rows(), static_cast<Eigen::Index>(bad.size()));
  for (std::size_t k = 0; k < bad.size(); ++k) dirs.col(static_cast<Eigen::Index>(k)) = eig.eigenvectors().col(bad[k]);
  throw SingularConfigurationError(what + ": matrix is singular (" + std::to_string(bad.size()) +
                                       " deficient direction(s))",
                                   dirs);
}

double symmetry_error(const Eigen::MatrixXd& m) {
  return (m - m.transpose()).norm() / std::max(1.0, m.norm());
}

double min_relative_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  const double scale = ev.cwiseAbs().maxCoeff();
  return scale > 0.0 ? ev.minCoeff() / scale : 0.0;
}

std::vector<std::size_t> null_space_members(const Eigen::MatrixXd& null_space, double threshold) {
  std::vector<std::size_t> out;
  for (Eigen::Index i = 0; i < null_space.rows(); ++i) {
    if (null_space.row(i).norm() > threshold) out.push_back(static_cast<std::size_t>(i));
  }
  return out;
}

}  // namespace elastocal
