#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace elastocal {

/// Column-scaled least-squares solve via SVD.
struct LeastSquares {
  Eigen::VectorXd x;
  Eigen::VectorXd singular_values;  // of the column-scaled matrix
  int rank = 0;
  double condition = 0.0;      // sigma_max / sigma_min of the column-scaled matrix
  Eigen::MatrixXd null_space;  // in unscaled parameter coordinates, orthonormal columns
};

/// Default relative singular-value threshold for rank decisions.
inline constexpr double kRankTolerance = 1e-8;

/// Solves min |A x - b|. Columns are scaled to unit norm before the SVD so
/// mm and rad columns are comparable. Rank uses sigma > tol * sigma_max.
LeastSquares solve_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                 double tol = kRankTolerance);

/// Inverse of a symmetric positive definite matrix. On failure throws
/// SingularConfigurationError whose directions are the eigenvectors with
/// eigenvalues below tol * lambda_max.
Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, const std::string& what, double tol = 1e-12);

/// |M - M^T|_F / max(1, |M|_F).
double symmetry_error(const Eigen::MatrixXd& m);

/// Smallest eigenvalue of the symmetric part, relative to the largest |eigenvalue|.
double min_relative_eigenvalue(const Eigen::MatrixXd& m);

/// Parameters (by index) with a non-negligible share in a null space basis.
std::vector<std::size_t> null_space_members(const Eigen::MatrixXd& null_space, double threshold = 1e-6);

}  // namespace elastocal
