#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace brl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Thrown when a caller breaks a documented precondition.
struct ContractViolation : std::logic_error {
  explicit ContractViolation(const std::string& msg) : std::logic_error(msg) {}
};

// Thrown when a numeric computation produces non-finite values.
struct NumericFailure : std::runtime_error {
  explicit NumericFailure(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractViolation(msg);
}

}  // namespace brl
