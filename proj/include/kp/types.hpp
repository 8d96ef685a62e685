#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace kp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Invalid dimensions, malformed inputs, broken structural invariants.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Singular factorizations, non-converging iterations, inconsistent data.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

inline Matrix symmetrized(const Matrix& M) { return 0.5 * (M + M.transpose()); }

}  // namespace kp
