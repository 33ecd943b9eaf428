#include "stablesim/trust.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/SVD>

#include "stablesim/errors.hpp"

namespace stablesim {
namespace {

int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

// Linear-interpolated quantile of a sorted sample.
double quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

void TrustParams::validate() const {
  if (!(weights.array() > 0.0).all()) throw InvalidInput("trust weights must be positive");
  if (!std::isfinite(bias)) throw InvalidInput("trust bias must be finite");
  if (window < 2) throw InvalidInput("trust window must be at least 2");
  if (embed_dim < 1) throw InvalidInput("embed_dim must be at least 1");
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidInput("threshold must lie in (0,1)");
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidInput("correlation series differ in length");
  const auto n = static_cast<Eigen::Index>(x.size());
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), n);
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  const Eigen::VectorXd xc = xv.array() - xv.mean();
  const Eigen::VectorXd yc = yv.array() - yv.mean();
  const double sxx = xc.squaredNorm();
  const double syy = yc.squaredNorm();
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return std::clamp(xc.dot(yc) / std::sqrt(sxx * syy), -1.0, 1.0);
}

double feature_f1(std::span<const AgentRecord> records) {
  if (records.size() < 2) throw InsufficientData("f1 needs a window of at least 2 records");
  std::vector<double> phi, delta;
  phi.reserve(records.size());
  delta.reserve(records.size());
  for (const auto& r : records) {
    phi.push_back(r.stated_sentiment);
    delta.push_back(r.position_change());
  }
  return pearson(phi, delta);
}

double feature_f2(std::span<const AgentRecord> records, std::span<const double> pnl) {
  if (records.size() != pnl.size()) throw InvalidInput("f2 PnL series must match the window");
  if (records.empty()) throw InsufficientData("f2 needs a non-empty window");
  int hits = 0;
  for (std::size_t s = 0; s < records.size(); ++s) {
    const bool aligned =
        sign_of(records[s].stated_sentiment) == sign_of(records[s].position_change());
    if (pnl[s] > 0.0 || aligned) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double feature_f4(std::span<const AgentRecord> records, std::span<const double> peg) {
  if (records.size() < 2) throw InsufficientData("f4 needs a window of at least 2 records");
  if (peg.size() < records.size() + 1) {
    throw InsufficientData("f4 needs the peg series to cover window + 1 steps");
  }
  std::vector<double> q, change;
  for (std::size_t s = 0; s < records.size(); ++s) {
    q.push_back(records[s].quantity);
    change.push_back(std::abs(peg[s + 1]) - std::abs(peg[s]));
  }
  return pearson(q, change);
}

std::string action_token(const AgentRecord& r, const TokenCuts& cuts) {
  const double a = std::abs(r.quantity);
  std::string size = "zero";
  if (a > 0.0) {
    size = std::string(r.quantity > 0.0 ? "+" : "-") +
           (a <= cuts.small_size ? "small" : (a <= cuts.large_size ? "medium" : "large"));
  }
  const double p = r.panic_level;
  const char* panic = p <= cuts.low_panic ? "low" : (p <= cuts.high_panic ? "mid" : "high");
  return to_string(r.action_type) + "|" + std::to_string(r.asset) + "|" + size + "|" + panic;
}

TokenCuts token_cuts(std::span<const std::vector<AgentRecord>> windows) {
  std::vector<double> sizes, panic;
  for (const auto& w : windows) {
    for (const auto& r : w) {
      if (r.quantity != 0.0) sizes.push_back(std::abs(r.quantity));
      panic.push_back(r.panic_level);
    }
  }
  std::sort(sizes.begin(), sizes.end());
  std::sort(panic.begin(), panic.end());
  return TokenCuts{quantile(sizes, 1.0 / 3.0), quantile(sizes, 2.0 / 3.0),
                   quantile(panic, 1.0 / 3.0), quantile(panic, 2.0 / 3.0)};
}

Eigen::MatrixXd embed_histories(std::span<const std::vector<AgentRecord>> windows, int embed_dim) {
  if (embed_dim < 1) throw InvalidInput("embed_dim must be at least 1");
  const auto n_agents = static_cast<Eigen::Index>(windows.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_agents, embed_dim);
  if (n_agents == 0) return out;

  const TokenCuts cuts = token_cuts(windows);

  // Ordered map keeps the vocabulary order, and so the projection, deterministic.
  std::vector<std::vector<std::string>> docs(windows.size());
  std::map<std::string, Eigen::Index> vocab;
  for (std::size_t a = 0; a < windows.size(); ++a) {
    for (const auto& r : windows[a]) {
      docs[a].push_back(action_token(r, cuts));
      vocab.emplace(docs[a].back(), 0);
    }
  }
  Eigen::Index next = 0;
  for (auto& entry : vocab) entry.second = next++;
  const auto n_terms = static_cast<Eigen::Index>(vocab.size());
  if (n_terms == 0) return out;

  Eigen::MatrixXd tf = Eigen::MatrixXd::Zero(n_agents, n_terms);
  for (Eigen::Index a = 0; a < n_agents; ++a) {
    const auto& doc = docs[static_cast<std::size_t>(a)];
    for (const auto& token : doc) tf(a, vocab.at(token)) += 1.0;
    if (!doc.empty()) tf.row(a) /= static_cast<double>(doc.size());
  }
  const Eigen::VectorXd df = (tf.array() > 0.0).cast<double>().colwise().sum().transpose();
  const Eigen::VectorXd idf =
      (((1.0 + static_cast<double>(n_agents)) / (1.0 + df.array())).log() + 1.0).matrix();
  const Eigen::MatrixXd x = tf * idf.asDiagonal();

  // Uncentered principal directions of the corpus; keeps cosines when rank <= embed_dim.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  const Eigen::Index k = std::min<Eigen::Index>(embed_dim, svd.nonzeroSingularValues());
  out.leftCols(k) = x * svd.matrixV().leftCols(k);
  for (Eigen::Index a = 0; a < n_agents; ++a) {
    const double norm = out.row(a).norm();
    if (norm > 1e-12) {
      out.row(a) /= norm;
    } else {
      out.row(a).setZero();
    }
  }
  return out;
}

Eigen::VectorXd embed_history(std::span<const std::vector<AgentRecord>> windows, std::size_t agent,
                              int embed_dim) {
  if (agent >= windows.size()) throw InvalidInput("agent index out of range");
  if (windows[agent].empty()) throw InvalidInput("embedding needs a non-empty window");
  return embed_histories(windows, embed_dim).row(static_cast<Eigen::Index>(agent)).transpose();
}

double feature_f3(std::size_t agent, const Eigen::MatrixXd& embeddings) {
  const auto a = static_cast<Eigen::Index>(agent);
  if (a >= embeddings.rows()) throw InvalidInput("agent index out of range");
  if (embeddings.rows() < 2) return 0.0;
  const double na = embeddings.row(a).norm();
  if (na == 0.0) return 0.0;
  double best = 0.0;
  for (Eigen::Index b = 0; b < embeddings.rows(); ++b) {
    if (b == a) continue;
    const double nb = embeddings.row(b).norm();
    if (nb == 0.0) continue;
    best = std::max(best, embeddings.row(a).dot(embeddings.row(b)) / (na * nb));
  }
  return std::clamp(best, 0.0, 1.0);
}

void TrustWindow::validate() const {
  const std::size_t w = length();
  for (const auto& r : records) {
    if (r.size() != w) throw InvalidInput("trust window rows differ in length");
  }
  if (!records.empty() && peg.size() != w + 1) {
    throw InvalidInput("trust window peg series must hold window + 1 values");
  }
  if (!records.empty() && liquidity.size() != w) {
    throw InvalidInput("trust window liquidity series must match the window");
  }
}

std::vector<TrustReport> compute_trust(const TrustWindow& window, const TrustParams& params) {
  params.validate();
  window.validate();
  const std::size_t n = window.records.size();
  std::vector<TrustReport> reports(n);
  if (n == 0) return reports;
  const std::size_t w = window.length();

  const Eigen::MatrixXd embeddings = embed_histories(window.records, params.embed_dim);
  double total = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    const auto& recs = window.records[a];
    std::vector<double> pnl(w);
    for (std::size_t s = 0; s < w; ++s) {
      pnl[s] = realized_pnl(recs[s], window.peg[s], window.peg[s + 1], window.liquidity[s],
                            window.impact);
    }
    TrustReport& rep = reports[a];
    rep.agent = recs.empty() ? AgentId{} : recs.front().agent;
    rep.f1 = feature_f1(recs);
    rep.f2 = feature_f2(recs, pnl);
    rep.f3 = feature_f3(a, embeddings);
    rep.f4 = feature_f4(recs, window.peg);
    rep.score = trust_score(rep.features(), params);
    total += rep.score;
  }
  for (auto& rep : reports) rep.normalized_weight = rep.score / total;
  return reports;
}

std::vector<TrustReport> uniform_trust(std::span<const AgentId> agents) {
  std::vector<TrustReport> out(agents.size());
  for (std::size_t a = 0; a < agents.size(); ++a) {
    out[a].agent = agents[a];
    out[a].score = 1.0;
    out[a].normalized_weight = 1.0 / static_cast<double>(agents.size());
  }
  return out;
}

DetectionRates detection_metrics(std::span<const TrustReport> reports,
                                 const std::vector<bool>& labels, double threshold) {
  if (reports.size() != labels.size()) throw InvalidInput("labels must align with reports");
  int adv = 0, ben = 0, tp = 0, fp = 0;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const bool flagged = reports[i].score < threshold;
    if (labels[i]) {
      ++adv;
      tp += flagged;
    } else {
      ++ben;
      fp += flagged;
    }
  }
  if (adv == 0) throw UndefinedValue("TPR undefined: no adversarial agents");
  if (ben == 0) throw UndefinedValue("FPR undefined: no benign agents");
  return {static_cast<double>(tp) / adv, static_cast<double>(fp) / ben};
}

}  // namespace stablesim
