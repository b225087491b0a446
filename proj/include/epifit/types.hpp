#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace epifit {

using Scalar = double;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;
using MatrixRef = Eigen::Ref<const Eigen::MatrixXd>;

// Infection recursion exceeded the overflow guard at time `t`.
class DivergenceError : public std::runtime_error {
public:
  DivergenceError(int t, double value)
      : std::runtime_error("infection recursion diverged at t=" + std::to_string(t) +
                           " (I_t=" + std::to_string(value) + ")"),
        t_first(t) {}
  int t_first;
};

class LpInfeasibleError : public std::runtime_error {
public:
  explicit LpInfeasibleError(double residual)
      : std::runtime_error("LP infeasible (constraint residual " + std::to_string(residual) + ")"),
        residual(residual) {}
  double residual;
};

class LpUnboundedError : public std::runtime_error {
public:
  LpUnboundedError() : std::runtime_error("LP unbounded") {}
};

class SingularHessianError : public std::runtime_error {
public:
  explicit SingularHessianError(double smallest_sv)
      : std::runtime_error("Hessian numerically singular (smallest singular value " +
                           std::to_string(smallest_sv) + ")"),
        smallest_singular_value(smallest_sv) {}
  double smallest_singular_value;
};

class MomentConsistencyError : public std::runtime_error {
public:
  MomentConsistencyError(double m2, double m4)
      : std::runtime_error("inconsistent bias moments: m4=" + std::to_string(m4) +
                           " < m2^2=" + std::to_string(m2 * m2)) {}
};

}  // namespace epifit
