#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "stablesim/agents.hpp"
#include "stablesim/errors.hpp"

namespace stablesim {

struct RiskState {
  std::vector<double> per_agent;
  double aggregate = 0.0;
  std::vector<double> weights_used;
};

struct CovarianceSet {
  Matrix historical;
  Matrix stress;
  Matrix blended;
  double alpha = 0.0;
};

/// (panic + min(1, |q|/max_qty) + min(1, max(0, dpeg/epsilon))) / 3
double agent_risk_state(const AgentRecord& record, double max_qty, double delta_peg_contribution,
                        double epsilon = 0.01);

/// Trust-weighted mean sum(T R) / sum(T).
template <typename Scalar>
Scalar aggregate_risk(std::span<const Scalar> risk, std::span<const Scalar> trust) {
  if (risk.size() != trust.size()) throw InvalidInput("risk and trust vectors differ in length");
  if (risk.empty()) throw UndefinedValue("aggregate risk of an empty population");
  Scalar num(0), den(0);
  for (std::size_t i = 0; i < risk.size(); ++i) {
    if (!(trust[i] > Scalar(0))) throw InvalidInput("trust scores must be positive");
    num += trust[i] * risk[i];
    den += trust[i];
  }
  return num / den;
}

inline double aggregate_risk(const std::vector<double>& risk, const std::vector<double>& trust) {
  return aggregate_risk<double>(std::span<const double>(risk), std::span<const double>(trust));
}

/// Mean per-agent risk over each agent's window (`impact * q / liquidity` is its peg contribution),
/// aggregated with the given trust scores.
RiskState compute_risk_state(std::span<const std::vector<AgentRecord>> windows,
                             std::span<const double> liquidity, std::span<const double> trust,
                             double max_qty, double impact, double epsilon = 0.01);

/// Share of trust mass held by adversarial agents; 0 without adversaries.
double adversarial_influence(std::span<const double> trust, const std::vector<bool>& labels);

/// rho T_adv / (rho T_adv + (1 - rho) T_ben)
double influence_bound(double rho, double mean_adversarial_trust, double mean_benign_trust);

/// Mean of the unbiased per-run sample covariances. Each run is (observations x assets).
Matrix estimate_stress_covariance(std::span<const Matrix> runs);
Matrix sample_covariance(const Matrix& returns);

double blend_alpha(double r);
double blend_alpha_derivative(double r);

template <typename DerivedH, typename DerivedS>
auto blend(const Eigen::MatrixBase<DerivedH>& hist, const Eigen::MatrixBase<DerivedS>& stress,
           typename DerivedH::Scalar alpha) {
  return ((1 - alpha) * hist + alpha * stress).eval();
}

/// Validates both inputs (square, same size, symmetric, PSD) and blends them.
CovarianceSet blend_covariance(const Matrix& hist, const Matrix& stress, double alpha);

bool is_symmetric(const Matrix& m, double tol = 1e-12);
/// Minimum eigenvalue of the symmetric part.
double min_eigenvalue(const Matrix& m);
double max_eigenvalue(const Matrix& m);
void require_psd(const Matrix& m, const std::string& name, double tol = 1e-10);

/// (w' S w) / (w' H w)
template <typename DerivedW, typename DerivedH, typename DerivedS>
typename DerivedW::Scalar fragility_ratio(const Eigen::MatrixBase<DerivedW>& w,
                                          const Eigen::MatrixBase<DerivedH>& hist,
                                          const Eigen::MatrixBase<DerivedS>& stress) {
  const auto expected = w.dot(hist * w);
  if (!(expected > 0)) throw UndefinedValue("zero historical variance along the portfolio");
  return w.dot(stress * w) / expected;
}

/// lambda_max(S) / lambda_min(H); bounds the fragility ratio for every portfolio.
double rayleigh_bound(const Matrix& hist, const Matrix& stress);

Matrix read_covariance_csv(std::istream& in, std::vector<std::string>* names = nullptr);
void write_covariance_csv(std::ostream& out, const Matrix& m, const std::vector<std::string>& names);

}  // namespace stablesim
