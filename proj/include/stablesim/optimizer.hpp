#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>
#include <json.hpp>

#include "stablesim/errors.hpp"

namespace stablesim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// min w'Σw - λ μ'w  s.t.  1'w = 1,  lo <= w <= hi,  ||w - prev||_1 <= τ
struct PortfolioProblem {
  Matrix covariance;
  Vector expected_returns;
  double risk_aversion = 2.5;
  Vector prev_weights;
  double turnover_limit = 0.15;  // +inf disables the turnover constraint
  Vector lower_bounds;
  Vector upper_bounds;

  /// Table-default bounds [0.05, 0.60] and equal previous weights.
  static PortfolioProblem with_defaults(Matrix covariance, Vector expected_returns);
  Eigen::Index size() const noexcept { return covariance.rows(); }
  bool has_turnover() const noexcept { return std::isfinite(turnover_limit); }
  double objective(const Vector& w) const;
  /// Shape, finiteness, PSD and bound-ordering checks. Throws InvalidInput.
  void validate() const;
};

struct ActiveSet {
  std::vector<bool> lower;
  std::vector<bool> upper;
  bool turnover = false;
};

struct Solution {
  Vector weights;
  double objective = 0.0;
  double kkt_residual = 0.0;
  ActiveSet active_set;
  int iterations = 0;
  double ridge = 0.0;  // added to the covariance diagonal when it was only semi-definite
};

struct SolverOptions {
  double tol = 1e-8;
  int max_iterations = 10000;
};

/// Smallest L1 distance from prev_weights to the bounded simplex.
double min_turnover_to_feasible(const PortfolioProblem& problem);

/// Throws Infeasible naming the constraint set that leaves the feasible region empty.
void check_feasibility(const PortfolioProblem& problem);

Solution solve(const PortfolioProblem& problem, const SolverOptions& options = {});

struct KktReport {
  double stationarity = 0.0;
  double complementarity = 0.0;
  double primal_violation = 0.0;
  double dual_violation = 0.0;
  double residual = 0.0;
  bool passed = false;
  double budget_multiplier = 0.0;
  Vector lower_multipliers;
  Vector upper_multipliers;
  double turnover_multiplier = 0.0;
};

/// Rebuilds the multipliers of the active constraints by non-negative least squares on the
/// stationarity equation, then reports the worst KKT violation.
KktReport kkt_check(const PortfolioProblem& problem, const Vector& weights, double tol = 1e-8);
inline KktReport kkt_check(const PortfolioProblem& problem, const Solution& solution,
                           double tol = 1e-8) {
  return kkt_check(problem, solution.weights, tol);
}

/// Lawson-Hanson: argmin ||A x - b|| subject to x >= 0.
Vector nnls(const Matrix& a, const Vector& b, int max_iterations = 500);

/// Budget-constrained Markowitz optimum
/// (λ/2) Σ⁻¹μ + [(1 - (λ/2) 1'Σ⁻¹μ) / (1'Σ⁻¹1)] Σ⁻¹1. Throws on singular Σ.
template <typename DerivedS, typename DerivedM>
Eigen::Matrix<typename DerivedS::Scalar, Eigen::Dynamic, 1> markowitz_closed_form(
    const Eigen::MatrixBase<DerivedS>& covariance, const Eigen::MatrixBase<DerivedM>& returns,
    typename DerivedS::Scalar risk_aversion) {
  using Scalar = typename DerivedS::Scalar;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (covariance.rows() != covariance.cols() || covariance.rows() != returns.size()) {
    throw InvalidInput("covariance and returns dimensions differ");
  }
  const Eigen::FullPivLU<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> lu(covariance);
  if (!lu.isInvertible()) throw InvalidInput("covariance is singular");
  const Vec ones = Vec::Ones(returns.size());
  const Vec inv_mu = lu.solve(returns);
  const Vec inv_one = lu.solve(ones);
  const Scalar half = risk_aversion / Scalar(2);
  return half * inv_mu + ((Scalar(1) - half * ones.dot(inv_mu)) / ones.dot(inv_one)) * inv_one;
}

/// Clips into the bounds and restores the budget by moving the slack coordinates.
Vector project_to_bounded_simplex(const Vector& w, const Vector& lower, const Vector& upper);

nlohmann::json to_json(const PortfolioProblem& problem);
PortfolioProblem portfolio_problem_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Solution& solution);

}  // namespace stablesim
