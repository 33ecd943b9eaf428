#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stablesim/agents.hpp"

namespace stablesim {

using Vector4 = Eigen::Matrix<double, 4, 1>;

struct TrustParams {
  Vector4 weights = (Vector4() << 1.5, 1.5, 2.0, 1.0).finished();
  double bias = 0.0;
  int window = 10;
  int embed_dim = 32;
  double threshold = 0.5;

  void validate() const;
};

struct TrustReport {
  AgentId agent;
  double f1 = 0.0;
  double f2 = 0.0;
  double f3 = 0.0;
  double f4 = 0.0;
  double score = 0.5;
  double normalized_weight = 0.0;

  Vector4 features() const { return Vector4(f1, f2, f3, f4); }
};

/// Features entering the logit with their sign: [f1, f2, -f3, -f4].
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 4, 1> signed_features(const Eigen::MatrixBase<Derived>& f) {
  using Scalar = typename Derived::Scalar;
  return (Eigen::Matrix<Scalar, 4, 1>() << f(0), f(1), -f(2), -f(3)).finished();
}

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  using std::exp;
  return z >= Scalar(0) ? Scalar(1) / (Scalar(1) + exp(-z)) : exp(z) / (Scalar(1) + exp(z));
}

/// sigma(w . [f1, f2, -f3, -f4] + b)
template <typename DerivedF, typename DerivedW>
typename DerivedF::Scalar trust_score(const Eigen::MatrixBase<DerivedF>& f,
                                      const Eigen::MatrixBase<DerivedW>& w,
                                      typename DerivedF::Scalar b) {
  return sigmoid(w.dot(signed_features(f)) + b);
}

inline double trust_score(const Vector4& f, const TrustParams& params) {
  return trust_score(f, params.weights, params.bias);
}

/// Gradient of the score with respect to the weights.
template <typename DerivedF, typename DerivedW>
Eigen::Matrix<typename DerivedF::Scalar, 4, 1> trust_score_gradient(
    const Eigen::MatrixBase<DerivedF>& f, const Eigen::MatrixBase<DerivedW>& w,
    typename DerivedF::Scalar b) {
  const auto s = trust_score(f, w, b);
  return s * (1 - s) * signed_features(f);
}

/// Pearson correlation; 0 when either series has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

double feature_f1(std::span<const AgentRecord> records);
double feature_f2(std::span<const AgentRecord> records, std::span<const double> pnl);
/// `peg` holds |window|+1 peg deviations, aligned so peg[s] precedes records[s].
double feature_f4(std::span<const AgentRecord> records, std::span<const double> peg);

/// Tercile cuts of |quantity| (non-zero trades) and panic level over a window corpus.
struct TokenCuts {
  double small_size = 0.0;
  double large_size = 0.0;
  double low_panic = 0.0;
  double high_panic = 0.0;
};

TokenCuts token_cuts(std::span<const std::vector<AgentRecord>> windows);
/// action_type|asset|signed size bucket|panic bucket
std::string action_token(const AgentRecord& record, const TokenCuts& cuts);

/// Tokenizes, TF-IDF weights and projects every agent's window onto the population's top
/// principal directions. Rows are unit-norm or zero.
Eigen::MatrixXd embed_histories(std::span<const std::vector<AgentRecord>> windows, int embed_dim);
Eigen::VectorXd embed_history(std::span<const std::vector<AgentRecord>> windows, std::size_t agent,
                              int embed_dim);

/// Max cosine similarity of row `agent` against every other row, floored at 0.
double feature_f3(std::size_t agent, const Eigen::MatrixXd& embeddings);

/// One scoring window: per-agent records plus the market series they were emitted against.
struct TrustWindow {
  std::vector<std::vector<AgentRecord>> records;  // per agent, oldest first, equal lengths
  std::vector<double> peg;        // window length + 1
  std::vector<double> liquidity;  // pool liquidity at each record's step
  double impact = 0.5;

  std::size_t length() const { return records.empty() ? 0 : records.front().size(); }
  void validate() const;
};

/// Computes f1-f4, scores and normalized weights for every agent in the window.
std::vector<TrustReport> compute_trust(const TrustWindow& window, const TrustParams& params);

/// Every agent gets score 1 and equal weight.
std::vector<TrustReport> uniform_trust(std::span<const AgentId> agents);

struct DetectionRates {
  double tpr = 0.0;
  double fpr = 0.0;
};

DetectionRates detection_metrics(std::span<const TrustReport> reports,
                                 const std::vector<bool>& labels, double threshold);

}  // namespace stablesim
