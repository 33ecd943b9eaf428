#include "stablesim/risk.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "stablesim/format.hpp"

namespace stablesim {

double agent_risk_state(const AgentRecord& record, double max_qty, double delta_peg_contribution,
                        double epsilon) {
  if (!(max_qty > 0.0)) throw InvalidInput("max_qty must be positive");
  if (!(epsilon > 0.0)) throw InvalidInput("epsilon must be positive");
  const double size = std::min(1.0, std::abs(record.quantity) / max_qty);
  const double peg = std::min(1.0, std::max(0.0, delta_peg_contribution / epsilon));
  return (record.panic_level + size + peg) / 3.0;
}

RiskState compute_risk_state(std::span<const std::vector<AgentRecord>> windows,
                             std::span<const double> liquidity, std::span<const double> trust,
                             double max_qty, double impact, double epsilon) {
  if (windows.size() != trust.size()) throw InvalidInput("trust must align with agents");
  RiskState state;
  state.per_agent.reserve(windows.size());
  for (const auto& recs : windows) {
    if (recs.empty() || recs.size() != liquidity.size()) {
      throw InvalidInput("risk windows must be non-empty and match the liquidity series");
    }
    double sum = 0.0;
    for (std::size_t s = 0; s < recs.size(); ++s) {
      const double contribution = liquidity[s] > 0.0 ? impact * recs[s].quantity / liquidity[s] : 0.0;
      sum += agent_risk_state(recs[s], max_qty, contribution, epsilon);
    }
    state.per_agent.push_back(sum / static_cast<double>(recs.size()));
  }
  state.weights_used.assign(trust.begin(), trust.end());
  state.aggregate = aggregate_risk<double>(state.per_agent, trust);
  return state;
}

double adversarial_influence(std::span<const double> trust, const std::vector<bool>& labels) {
  if (trust.size() != labels.size()) throw InvalidInput("labels must align with trust scores");
  double adv = 0.0, total = 0.0;
  for (std::size_t i = 0; i < trust.size(); ++i) {
    if (labels[i]) adv += trust[i];
    total += trust[i];
  }
  return adv > 0.0 ? adv / total : 0.0;
}

double influence_bound(double rho, double mean_adversarial_trust, double mean_benign_trust) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw InvalidInput("rho must lie in [0,1]");
  const double adv = rho * mean_adversarial_trust;
  const double denom = adv + (1.0 - rho) * mean_benign_trust;
  if (!(denom > 0.0)) throw UndefinedValue("influence bound with zero total trust");
  return adv / denom;
}

Matrix sample_covariance(const Matrix& returns) {
  if (returns.rows() < 2) throw InvalidInput("covariance needs at least 2 observations per run");
  const Matrix centered = returns.rowwise() - returns.colwise().mean();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(returns.rows() - 1);
  return (cov + cov.transpose()) / 2.0;
}

Matrix estimate_stress_covariance(std::span<const Matrix> runs) {
  if (runs.empty()) throw InvalidInput("stress covariance needs at least one run");
  const auto n = runs.front().cols();
  Matrix sum = Matrix::Zero(n, n);
  for (const Matrix& run : runs) {
    if (run.cols() != n) throw InvalidInput("stress runs differ in asset count");
    sum += sample_covariance(run);
  }
  return sum / static_cast<double>(runs.size());
}

double blend_alpha(double r) {
  if (!(r >= 0.0 && r <= 1.0)) throw InvalidInput("risk state must lie in [0,1]");
  return r * r;
}

double blend_alpha_derivative(double r) {
  if (!(r >= 0.0 && r <= 1.0)) throw InvalidInput("risk state must lie in [0,1]");
  return 2.0 * r;
}

bool is_symmetric(const Matrix& m, double tol) {
  return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

double min_eigenvalue(const Matrix& m) {
  const Matrix sym = (m + m.transpose()) / 2.0;
  return Eigen::SelfAdjointEigenSolver<Matrix>(sym, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

double max_eigenvalue(const Matrix& m) {
  const Matrix sym = (m + m.transpose()) / 2.0;
  return Eigen::SelfAdjointEigenSolver<Matrix>(sym, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

void require_psd(const Matrix& m, const std::string& name, double tol) {
  if (m.rows() == 0 || m.rows() != m.cols()) throw InvalidInput(name + " must be square");
  if (!m.allFinite()) throw InvalidInput(name + " must be finite");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (!is_symmetric(m, 1e-12 * scale)) throw InvalidInput(name + " must be symmetric");
  if (min_eigenvalue(m) < -tol * scale) throw InvalidInput(name + " must be positive semi-definite");
}

CovarianceSet blend_covariance(const Matrix& hist, const Matrix& stress, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidInput("alpha must lie in [0,1]");
  if (hist.rows() != stress.rows() || hist.cols() != stress.cols()) {
    throw InvalidInput("historical and stress covariances differ in dimension");
  }
  require_psd(hist, "historical covariance");
  require_psd(stress, "stress covariance");
  CovarianceSet set;
  set.historical = hist;
  set.stress = stress;
  set.alpha = alpha;
  set.blended = blend(hist, stress, alpha);
  return set;
}

double rayleigh_bound(const Matrix& hist, const Matrix& stress) {
  const double lo = min_eigenvalue(hist);
  if (!(lo > 0.0)) throw UndefinedValue("historical covariance is singular");
  return max_eigenvalue(stress) / lo;
}

Matrix read_covariance_csv(std::istream& in, std::vector<std::string>* names) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("covariance CSV is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  const auto n = static_cast<Eigen::Index>(header.size());
  Matrix m(n, n);
  Eigen::Index row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (row >= n) throw InvalidInput("covariance CSV has more rows than columns");
    std::stringstream ss(line);
    std::string cell;
    Eigen::Index col = 0;
    while (std::getline(ss, cell, ',')) {
      if (col >= n) throw InvalidInput("covariance CSV row is too long");
      m(row, col++) = parse_double(cell);
    }
    if (col != n) throw InvalidInput("covariance CSV row is too short");
    ++row;
  }
  if (row != n) throw InvalidInput("covariance CSV must be square");
  if (names) *names = header;
  return m;
}

void write_covariance_csv(std::ostream& out, const Matrix& m, const std::vector<std::string>& names) {
  if (static_cast<Eigen::Index>(names.size()) != m.cols() || m.rows() != m.cols()) {
    throw InvalidInput("covariance CSV needs one name per column of a square matrix");
  }
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_double(m(r, c));
    out << '\n';
  }
}

}  // namespace stablesim
