#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace elastocal {

/// Malformed input files (JSON/CSV). Carries the offending location when known.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Structurally invalid model: unresolved parameter ids, bad joint indices,
/// floating substructures, non-canonical blocks.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Base for numerical failures (exit code 4 at the CLI).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stiffness matrix is singular at this pose. `directions` holds an
/// orthonormal basis (as columns) of the deficient twist/wrench directions.
class SingularConfigurationError : public NumericError {
 public:
  SingularConfigurationError(const std::string& what, Eigen::MatrixXd directions)
      : NumericError(what), directions_(std::move(directions)) {}
  const Eigen::MatrixXd& directions() const { return directions_; }

 private:
  Eigen::MatrixXd directions_;
};

/// Identification Jacobian is rank deficient. Lists the parameters that take
/// part in the null space.
class UnidentifiableError : public NumericError {
 public:
  UnidentifiableError(const std::string& what, std::vector<std::string> params,
                      Eigen::MatrixXd null_space)
      : NumericError(what), params_(std::move(params)), null_space_(std::move(null_space)) {}
  const std::vector<std::string>& parameters() const { return params_; }
  const Eigen::MatrixXd& null_space() const { return null_space_; }

 private:
  std::vector<std::string> params_;
  Eigen::MatrixXd null_space_;
};

/// Base/tool frames are not observable from the given measurements.
class DegenerateSetupError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Free-angle search exhausted its budget.
class NoSolutionError : public NumericError {
 public:
  NoSolutionError(const std::string& what, double best_residual)
      : NumericError(what), best_residual_(best_residual) {}
  double best_residual() const { return best_residual_; }

 private:
  double best_residual_;
};

}  // namespace elastocal
