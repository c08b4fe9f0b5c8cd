/**
 * @file types.hpp
 * @brief Shared numeric types and error classes.
 */
#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace funnel {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/** @brief Raised when a specification fails validation; carries every problem found. */
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> errors);

  [[nodiscard]] const std::vector<std::string>& errors() const noexcept { return errors_; }

 private:
  std::vector<std::string> errors_;
};

/** @brief A user-supplied function (f, operator readout, ...) produced NaN or Inf. */
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[nodiscard]] bool all_finite(const Vec& v);

}  // namespace funnel
