#include "stablesim/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace stablesim {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Kind { Budget, Lower, Upper, Turnover };

// Stored as n'x >= b, except the budget row which is an equality.
struct Constraint {
  Kind kind = Kind::Budget;
  Eigen::Index index = -1;
  Vector normal;
  double rhs = 0.0;
  Vector sign;  // turnover face

  double slack(const Vector& x) const { return normal.dot(x) - rhs; }
};

Vector turnover_face(const Vector& x, const Vector& prev) {
  Vector s(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) s[i] = x[i] - prev[i] >= 0.0 ? 1.0 : -1.0;
  return s;
}

Constraint make_lower(Eigen::Index i, const PortfolioProblem& p) {
  return {Kind::Lower, i, Vector::Unit(p.size(), i), p.lower_bounds[i], {}};
}

Constraint make_upper(Eigen::Index i, const PortfolioProblem& p) {
  return {Kind::Upper, i, -Vector::Unit(p.size(), i), -p.upper_bounds[i], {}};
}

Constraint make_turnover(const Vector& s, const PortfolioProblem& p) {
  return {Kind::Turnover, -1, -s, -(p.turnover_limit + s.dot(p.prev_weights)), s};
}

bool same_constraint(const Constraint& a, const Constraint& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == Kind::Turnover) return a.sign == b.sign;
  return a.index == b.index;
}

double l1_distance(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().sum(); }

}  // namespace

PortfolioProblem PortfolioProblem::with_defaults(Matrix covariance, Vector expected_returns) {
  PortfolioProblem p;
  const Eigen::Index n = covariance.rows();
  p.covariance = std::move(covariance);
  p.expected_returns = std::move(expected_returns);
  p.prev_weights = Vector::Constant(n, 1.0 / static_cast<double>(n));
  p.lower_bounds = Vector::Constant(n, 0.05);
  p.upper_bounds = Vector::Constant(n, 0.60);
  return p;
}

double PortfolioProblem::objective(const Vector& w) const {
  return w.dot(covariance * w) - risk_aversion * expected_returns.dot(w);
}

void PortfolioProblem::validate() const {
  const Eigen::Index n = size();
  if (n == 0 || covariance.cols() != n) throw InvalidInput("covariance must be square and non-empty");
  if (expected_returns.size() != n || prev_weights.size() != n || lower_bounds.size() != n ||
      upper_bounds.size() != n) {
    throw InvalidInput("problem vectors must match the covariance dimension");
  }
  if (!covariance.allFinite() || !expected_returns.allFinite() || !prev_weights.allFinite() ||
      !lower_bounds.allFinite() || !upper_bounds.allFinite()) {
    throw InvalidInput("problem data must be finite");
  }
  if (!(risk_aversion > 0.0) || !std::isfinite(risk_aversion)) {
    throw InvalidInput("risk_aversion must be positive");
  }
  if (!(turnover_limit >= 0.0)) throw InvalidInput("turnover_limit must be non-negative");
  if ((lower_bounds.array() > upper_bounds.array()).any()) {
    throw InvalidInput("lower bounds must not exceed upper bounds");
  }
  if (std::abs(prev_weights.sum() - 1.0) > 1e-8 || (prev_weights.array() < -1e-12).any()) {
    throw InvalidInput("prev_weights must lie on the simplex");
  }
  const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw InvalidInput("covariance must be symmetric");
  }
  const double min_eig =
      Eigen::SelfAdjointEigenSolver<Matrix>(covariance, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  if (min_eig < -1e-10 * scale) throw InvalidInput("covariance must be positive semi-definite");
}

double min_turnover_to_feasible(const PortfolioProblem& p) {
  const Vector clipped = p.prev_weights.cwiseMax(p.lower_bounds).cwiseMin(p.upper_bounds);
  return l1_distance(clipped, p.prev_weights) + std::abs(1.0 - clipped.sum());
}

void check_feasibility(const PortfolioProblem& p) {
  if (p.lower_bounds.sum() > 1.0 + 1e-12) {
    throw Infeasible("bounds+budget", "lower bounds sum above 1");
  }
  if (p.upper_bounds.sum() < 1.0 - 1e-12) {
    throw Infeasible("bounds+budget", "upper bounds sum below 1");
  }
  if (p.has_turnover()) {
    const double needed = min_turnover_to_feasible(p);
    if (needed > p.turnover_limit + 1e-12) {
      throw Infeasible("turnover+bounds+budget",
                       "reaching the bounded simplex needs turnover " + std::to_string(needed) +
                           " > limit " + std::to_string(p.turnover_limit));
    }
  }
}

Solution solve(const PortfolioProblem& problem, const SolverOptions& options) {
  problem.validate();
  check_feasibility(problem);
  const Eigen::Index n = problem.size();

  Solution sol;
  Matrix cov = problem.covariance;
  Eigen::LLT<Matrix> llt(2.0 * cov);
  const double min_eig =
      Eigen::SelfAdjointEigenSolver<Matrix>(cov, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  if (llt.info() != Eigen::Success || min_eig <= 1e-14 * std::max(1.0, cov.cwiseAbs().maxCoeff())) {
    sol.ridge = 1e-10;
    cov.diagonal().array() += sol.ridge;
    llt.compute(2.0 * cov);
    if (llt.info() != Eigen::Success) throw InvalidInput("covariance is not positive semi-definite");
  }
  const Matrix g = 2.0 * cov;
  const Vector g0 = -problem.risk_aversion * problem.expected_returns;

  // Dual active-set method: start at the unconstrained minimizer and add violated constraints.
  Vector x = llt.solve(-g0);
  std::vector<Constraint> active;
  std::vector<double> u;
  const double viol_tol = 1e-13;

  auto step_direction = [&](const Vector& np, Vector& z, Vector& r) {
    const auto m = static_cast<Eigen::Index>(active.size());
    if (m == 0) {
      z = llt.solve(np);
      r.resize(0);
      return;
    }
    Matrix kkt = Matrix::Zero(n + m, n + m);
    kkt.topLeftCorner(n, n) = g;
    for (Eigen::Index j = 0; j < m; ++j) {
      kkt.block(0, n + j, n, 1) = active[static_cast<std::size_t>(j)].normal;
      kkt.block(n + j, 0, 1, n) = active[static_cast<std::size_t>(j)].normal.transpose();
    }
    Vector rhs = Vector::Zero(n + m);
    rhs.head(n) = np;
    const Vector sol_kkt = kkt.fullPivLu().solve(rhs);
    z = sol_kkt.head(n);
    r = sol_kkt.tail(m);
  };

  // The budget row enters first with a free-sign multiplier.
  {
    Constraint budget{Kind::Budget, -1, Vector::Ones(n), 1.0, {}};
    Vector z, r;
    step_direction(budget.normal, z, r);
    const double t = -budget.slack(x) / z.dot(budget.normal);
    x += t * z;
    active.push_back(budget);
    u.push_back(t);
  }

  int iterations = 0;
  while (true) {
    if (++iterations > options.max_iterations) {
      throw std::runtime_error("portfolio solver hit the iteration cap");
    }
    // Most violated constraint.
    Constraint candidate;
    double worst = -viol_tol;
    bool found = false;
    auto consider = [&](Constraint c) {
      const double s = c.slack(x);
      if (s < worst) {
        for (const auto& a : active) {
          if (same_constraint(a, c)) return;
        }
        worst = s;
        candidate = std::move(c);
        found = true;
      }
    };
    for (Eigen::Index i = 0; i < n; ++i) {
      consider(make_lower(i, problem));
      consider(make_upper(i, problem));
    }
    if (problem.has_turnover()) consider(make_turnover(turnover_face(x, problem.prev_weights), problem));
    if (!found) break;

    double up = 0.0;
    while (true) {
      Vector z, r;
      step_direction(candidate.normal, z, r);
      const double curvature = z.dot(candidate.normal);
      const double scale = candidate.normal.dot(llt.solve(candidate.normal));

      double t1 = kInf;
      std::size_t drop = 0;
      for (std::size_t j = 1; j < active.size(); ++j) {
        const double rj = r[static_cast<Eigen::Index>(j)];
        if (rj > 0.0 && u[j] / rj < t1) {
          t1 = u[j] / rj;
          drop = j;
        }
      }
      const bool dependent = curvature <= 1e-12 * scale;
      if (dependent && !std::isfinite(t1)) {
        throw Infeasible("turnover+bounds+budget", "active constraints admit no feasible step");
      }
      const double t2 = dependent ? kInf : -candidate.slack(x) / curvature;
      const double t = std::min(t1, t2);

      if (!dependent) x += t * z;
      for (std::size_t j = 0; j < active.size(); ++j) u[j] -= t * r[static_cast<Eigen::Index>(j)];
      up += t;

      if (t2 <= t1) {
        active.push_back(candidate);
        u.push_back(up);
        break;
      }
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(drop));
      u.erase(u.begin() + static_cast<std::ptrdiff_t>(drop));
      if (++iterations > options.max_iterations) {
        throw std::runtime_error("portfolio solver hit the iteration cap");
      }
    }
  }

  sol.weights = x;
  sol.objective = problem.objective(x);
  sol.iterations = iterations;
  sol.active_set.lower.assign(static_cast<std::size_t>(n), false);
  sol.active_set.upper.assign(static_cast<std::size_t>(n), false);
  for (const auto& c : active) {
    if (c.kind == Kind::Lower) sol.active_set.lower[static_cast<std::size_t>(c.index)] = true;
    if (c.kind == Kind::Upper) sol.active_set.upper[static_cast<std::size_t>(c.index)] = true;
    if (c.kind == Kind::Turnover) sol.active_set.turnover = true;
  }
  sol.kkt_residual = kkt_check(problem, x, options.tol).residual;
  return sol;
}

Vector nnls(const Matrix& a, const Vector& b, int max_iterations) {
  const Eigen::Index n = a.cols();
  Vector x = Vector::Zero(n);
  if (n == 0) return x;
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double tol = 1e-14 * std::max(1.0, a.cwiseAbs().maxCoeff()) *
                     std::max(1.0, b.cwiseAbs().maxCoeff()) * static_cast<double>(n);

  auto solve_passive = [&](Vector& out) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    }
    Matrix sub(a.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = a.col(idx[k]);
    const Vector y = sub.completeOrthogonalDecomposition().solve(b);
    out = Vector::Zero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = y[static_cast<Eigen::Index>(k)];
  };

  for (int outer = 0; outer < max_iterations; ++outer) {
    const Vector w = a.transpose() * (b - a * x);
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w[j] > best_w) {
        best_w = w[j];
        best = j;
      }
    }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;

    for (int inner = 0; inner < max_iterations; ++inner) {
      Vector z;
      solve_passive(z);
      bool positive = true;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0) positive = false;
      }
      if (positive) {
        x = z;
        break;
      }
      double alpha = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0) {
          alpha = std::min(alpha, x[j] / (x[j] - z[j]));
        }
      }
      x += alpha * (z - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && x[j] <= tol) {
          passive[static_cast<std::size_t>(j)] = false;
          x[j] = 0.0;
        }
      }
    }
  }
  return x;
}

KktReport kkt_check(const PortfolioProblem& problem, const Vector& w, double tol) {
  const Eigen::Index n = problem.size();
  if (w.size() != n) throw InvalidInput("weights must match the problem dimension");
  KktReport rep;
  rep.lower_multipliers = Vector::Zero(n);
  rep.upper_multipliers = Vector::Zero(n);

  const Vector grad = 2.0 * problem.covariance * w - problem.risk_aversion * problem.expected_returns;
  const double act_tol = std::max(tol, 1e-9);

  // Primal feasibility.
  double primal = std::abs(w.sum() - 1.0);
  primal = std::max(primal, (problem.lower_bounds - w).maxCoeff());
  primal = std::max(primal, (w - problem.upper_bounds).maxCoeff());
  const double l1 = l1_distance(w, problem.prev_weights);
  if (problem.has_turnover()) primal = std::max(primal, l1 - problem.turnover_limit);
  rep.primal_violation = std::max(0.0, primal);

  // Columns are gradients of the active constraints written as c(w) <= 0.
  std::vector<Vector> cols;
  std::vector<double> slacks;
  enum class Col { BudgetPos, BudgetNeg, Lower, Upper, Turnover };
  std::vector<std::pair<Col, Eigen::Index>> tags;
  cols.push_back(Vector::Ones(n));
  slacks.push_back(0.0);
  tags.emplace_back(Col::BudgetPos, -1);
  cols.push_back(-Vector::Ones(n));
  slacks.push_back(0.0);
  tags.emplace_back(Col::BudgetNeg, -1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lo_slack = w[i] - problem.lower_bounds[i];
    if (lo_slack <= act_tol) {
      cols.push_back(-Vector::Unit(n, i));
      slacks.push_back(lo_slack);
      tags.emplace_back(Col::Lower, i);
    }
    const double hi_slack = problem.upper_bounds[i] - w[i];
    if (hi_slack <= act_tol) {
      cols.push_back(Vector::Unit(n, i));
      slacks.push_back(hi_slack);
      tags.emplace_back(Col::Upper, i);
    }
  }
  if (problem.has_turnover() && problem.turnover_limit - l1 <= act_tol) {
    const Vector d = w - problem.prev_weights;
    std::vector<Eigen::Index> zero;
    Vector base(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      base[i] = d[i] > 0.0 ? 1.0 : -1.0;
      if (std::abs(d[i]) <= act_tol) zero.push_back(i);
    }
    if (zero.size() > 20) throw InvalidInput("too many degenerate turnover components");
    const std::size_t faces = std::size_t{1} << zero.size();
    for (std::size_t mask = 0; mask < faces; ++mask) {
      Vector s = base;
      for (std::size_t k = 0; k < zero.size(); ++k) s[zero[k]] = (mask >> k) & 1U ? 1.0 : -1.0;
      cols.push_back(s);
      slacks.push_back(problem.turnover_limit - l1);
      tags.emplace_back(Col::Turnover, -1);
    }
  }

  Matrix a(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) a.col(static_cast<Eigen::Index>(j)) = cols[j];
  const Vector y = nnls(a, -grad);
  rep.stationarity = (grad + a * y).cwiseAbs().maxCoeff();

  for (std::size_t j = 0; j < cols.size(); ++j) {
    const double yj = y[static_cast<Eigen::Index>(j)];
    rep.complementarity = std::max(rep.complementarity, std::abs(yj * slacks[j]));
    rep.dual_violation = std::max(rep.dual_violation, -yj);
    switch (tags[j].first) {
      case Col::BudgetPos: rep.budget_multiplier += yj; break;
      case Col::BudgetNeg: rep.budget_multiplier -= yj; break;
      case Col::Lower: rep.lower_multipliers[tags[j].second] += yj; break;
      case Col::Upper: rep.upper_multipliers[tags[j].second] += yj; break;
      case Col::Turnover: rep.turnover_multiplier += yj; break;
    }
  }
  rep.residual = std::max({rep.stationarity, rep.complementarity, rep.primal_violation,
                           rep.dual_violation});
  rep.passed = rep.residual <= tol;
  return rep;
}

Vector project_to_bounded_simplex(const Vector& w, const Vector& lower, const Vector& upper) {
  if (w.size() != lower.size() || w.size() != upper.size()) {
    throw InvalidInput("projection vectors differ in length");
  }
  if (lower.sum() > 1.0 + 1e-12 || upper.sum() < 1.0 - 1e-12) {
    throw Infeasible("bounds+budget", "bounded simplex is empty");
  }
  // Euclidean projection: clip(w - theta) with theta found by bisection on the budget.
  auto total = [&](double theta) {
    return (w.array() - theta).max(lower.array()).min(upper.array()).sum();
  };
  double lo = (w - upper).minCoeff() - 1.0;
  double hi = (w - lower).maxCoeff() + 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (total(mid) > 1.0 ? lo : hi) = mid;
  }
  const double theta = 0.5 * (lo + hi);
  return (w.array() - theta).max(lower.array()).min(upper.array()).matrix();
}

namespace {

nlohmann::json vec_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vec_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json to_json(const PortfolioProblem& p) {
  nlohmann::json cov = nlohmann::json::array();
  for (Eigen::Index r = 0; r < p.covariance.rows(); ++r) cov.push_back(vec_to_json(p.covariance.row(r)));
  nlohmann::json j{{"covariance", cov},
                   {"expected_returns", vec_to_json(p.expected_returns)},
                   {"risk_aversion", p.risk_aversion},
                   {"prev_weights", vec_to_json(p.prev_weights)},
                   {"lower_bounds", vec_to_json(p.lower_bounds)},
                   {"upper_bounds", vec_to_json(p.upper_bounds)}};
  j["turnover_limit"] = p.has_turnover() ? nlohmann::json(p.turnover_limit) : nlohmann::json(nullptr);
  return j;
}

PortfolioProblem portfolio_problem_from_json(const nlohmann::json& j) {
  try {
    PortfolioProblem p;
    const auto rows = j.at("covariance");
    const auto n = static_cast<Eigen::Index>(rows.size());
    p.covariance.resize(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const Vector row = vec_from_json(rows.at(static_cast<std::size_t>(r)));
      if (row.size() != n) throw InvalidInput("covariance rows must be square");
      p.covariance.row(r) = row.transpose();
    }
    p.expected_returns = vec_from_json(j.at("expected_returns"));
    p.risk_aversion = j.at("risk_aversion").get<double>();
    p.prev_weights = vec_from_json(j.at("prev_weights"));
    p.lower_bounds = vec_from_json(j.at("lower_bounds"));
    p.upper_bounds = vec_from_json(j.at("upper_bounds"));
    const auto& tau = j.at("turnover_limit");
    p.turnover_limit = tau.is_null() ? kInf : tau.get<double>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed portfolio problem: ") + e.what());
  }
}

nlohmann::json to_json(const Solution& s) {
  nlohmann::json lower = nlohmann::json::array(), upper = nlohmann::json::array();
  for (bool b : s.active_set.lower) lower.push_back(b);
  for (bool b : s.active_set.upper) upper.push_back(b);
  return nlohmann::json{{"weights", vec_to_json(s.weights)},
                        {"objective", s.objective},
                        {"kkt_residual", s.kkt_residual},
                        {"active_set", {{"lower", lower}, {"upper", upper}, {"turnover", s.active_set.turnover}}},
                        {"iterations", s.iterations},
                        {"ridge", s.ridge}};
}

}  // namespace stablesim
