#include "idg/forward.hpp"

#include "idg/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace idg {

namespace {

struct StrategyEvals {
  // Per grid point: stacked control vector and the closed-loop drift f_mu.
  std::vector<Eigen::VectorXd> u;
  std::vector<Eigen::VectorXd> f_mu;
};

StrategyEvals evaluate_strategies(const Dynamics& dyn,
                                  const std::vector<ExprVec>& strategies,
                                  const std::vector<Eigen::VectorXd>& grid) {
  StrategyEvals out;
  out.u.reserve(grid.size());
  out.f_mu.reserve(grid.size());
  const int p = dyn.total_control_dim();
  for (const Eigen::VectorXd& x : grid) {
    Eigen::VectorXd u(p);
    int off = 0;
    for (int j = 0; j < dyn.num_players(); j++) {
      u.segment(off, dyn.control_dim(j)) = strategies[static_cast<std::size_t>(j)].eval(x);
      off += dyn.control_dim(j);
    }
    Eigen::VectorXd fx = dyn.f.eval(x);
    off = 0;
    for (int j = 0; j < dyn.num_players(); j++) {
      fx += dyn.g[static_cast<std::size_t>(j)].eval(x) * u.segment(off, dyn.control_dim(j));
      off += dyn.control_dim(j);
    }
    out.u.push_back(std::move(u));
    out.f_mu.push_back(std::move(fx));
  }
  return out;
}

}  // namespace

std::vector<PolicyEvaluation> policy_evaluate(const GameModel& model,
                                              const std::vector<ExprVec>& strategies,
                                              const std::vector<Eigen::VectorXd>& grid,
                                              double rtol) {
  const Dynamics& dyn = model.dynamics;
  if (static_cast<int>(strategies.size()) != model.num_players())
    throw std::invalid_argument("policy_evaluate: one strategy per player required");
  StrategyEvals evals = evaluate_strategies(dyn, strategies, grid);

  std::vector<PolicyEvaluation> result;
  for (int i = 0; i < model.num_players(); i++) {
    const PlayerModel& pm = model.players[static_cast<std::size_t>(i)];
    ExprMat jac = jacobian(pm.value_basis, dyn.state_dim);
    const int h = pm.value_dim();
    Eigen::MatrixXd a(static_cast<Eigen::Index>(grid.size()), h);
    Eigen::VectorXd b(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t k = 0; k < grid.size(); k++) {
      const Eigen::VectorXd& x = grid[k];
      a.row(static_cast<Eigen::Index>(k)) = (jac.eval(x) * evals.f_mu[k]).transpose();
      double cost = pm.beta.dot(pm.cost_basis.eval(x));
      cost += evals.u[k].cwiseAbs2().dot(pm.r_diag);
      b[static_cast<Eigen::Index>(k)] = -cost;
    }
    PolicyEvaluation pe;
    pe.theta = linalg::lstsq_min_norm(a, b, rtol);
    pe.rank = linalg::numerical_rank(a, rtol);
    pe.residual = std::sqrt((a * pe.theta - b).squaredNorm() /
                            static_cast<double>(grid.size()));
    result.push_back(std::move(pe));
  }
  return result;
}

std::vector<ExprVec> policy_improve(const GameModel& model,
                                    const std::vector<Eigen::VectorXd>& theta) {
  std::vector<ExprVec> strategies;
  strategies.reserve(static_cast<std::size_t>(model.num_players()));
  for (int i = 0; i < model.num_players(); i++) {
    const PlayerModel& pm = model.players[static_cast<std::size_t>(i)];
    Expr value = dot(theta[static_cast<std::size_t>(i)], pm.value_basis);
    strategies.push_back(strategy_from_value(value, model.r_self(i),
                                             model.dynamics.g[static_cast<std::size_t>(i)]));
  }
  return strategies;
}

PiResult solve_fne_pi(const GameModel& model, std::vector<ExprVec> init_strategies,
                      double tol, int max_iter) {
  std::vector<Eigen::VectorXd> grid = model.domain.grid_points();
  PiResult res;
  res.strategies = std::move(init_strategies);
  std::vector<Eigen::VectorXd> prev_theta;

  for (int it = 0; it < max_iter; it++) {
    std::vector<PolicyEvaluation> evals = policy_evaluate(model, res.strategies, grid);
    std::vector<Eigen::VectorXd> theta;
    theta.reserve(evals.size());
    res.residuals.clear();
    for (const PolicyEvaluation& pe : evals) {
      theta.push_back(pe.theta);
      res.residuals.push_back(pe.residual);
    }
    for (const Eigen::VectorXd& t : theta)
      if (!t.allFinite()) {
        res.iterations = it + 1;
        return res;  // divergent evaluation, flagged by converged=false
      }

    double change = 0.0;
    if (!prev_theta.empty())
      for (std::size_t i = 0; i < theta.size(); i++)
        change = std::max(change, (theta[i] - prev_theta[i]).norm());
    if (!prev_theta.empty()) res.theta_change_history.push_back(change);

    res.theta = theta;
    res.strategies = policy_improve(model, theta);
    res.iterations = it + 1;
    if (!prev_theta.empty() && change <= tol) {
      res.converged = true;
      break;
    }
    prev_theta = std::move(theta);
  }

  // Grid HJB residual at the returned iterate.
  StrategyEvals evals = evaluate_strategies(model.dynamics, res.strategies, grid);
  for (int i = 0; i < model.num_players(); i++) {
    const PlayerModel& pm = model.players[static_cast<std::size_t>(i)];
    ExprMat jac = jacobian(pm.value_basis, model.dynamics.state_dim);
    for (std::size_t k = 0; k < grid.size(); k++) {
      const Eigen::VectorXd& x = grid[k];
      double r = res.theta[static_cast<std::size_t>(i)].dot(jac.eval(x) * evals.f_mu[k]) +
                 evals.u[k].cwiseAbs2().dot(pm.r_diag) + pm.beta.dot(pm.cost_basis.eval(x));
      res.hjb_residual_max = std::max(res.hjb_residual_max, std::abs(r));
    }
  }
  return res;
}

}  // namespace idg
