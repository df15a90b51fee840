#pragma once

#include "idg/game.hpp"

#include <Eigen/Dense>

#include <vector>

namespace idg {

struct PolicyEvaluation {
  Eigen::VectorXd theta;  // value weights over phi_i
  double residual = 0.0;  // RMS of the Lyapunov relation over the grid
  int rank = 0;           // numerical rank of the grid regressor
};

/// Solves, per player, the grid least-squares Lyapunov relation
///   theta^T dphi/dx f_mu + sum_j mu_j^T R_ij mu_j + beta_i^T psi_i = 0
/// for the value weights under the given (fixed) strategy combination.
std::vector<PolicyEvaluation> policy_evaluate(
    const GameModel& model, const std::vector<ExprVec>& strategies,
    const std::vector<Eigen::VectorXd>& grid, double rtol = 1e-8);

/// Simultaneous policy improvement: mu_i from theta_i . phi_i for every
/// player.
std::vector<ExprVec> policy_improve(const GameModel& model,
                                    const std::vector<Eigen::VectorXd>& theta);

struct PiResult {
  std::vector<Eigen::VectorXd> theta;   // converged value weights
  std::vector<ExprVec> strategies;      // corresponding strategies
  std::vector<double> residuals;        // final evaluation residuals per player
  std::vector<double> theta_change_history;  // max_i ||dtheta_i|| per iteration
  bool converged = false;
  int iterations = 0;
  double hjb_residual_max = 0.0;        // max grid HJB residual at the fixed point
};

/// Policy iteration from an admissible initial strategy combination,
/// alternating evaluate/improve until max_i ||dtheta_i|| <= tol. A
/// non-converged run returns the best iterate with converged=false.
PiResult solve_fne_pi(const GameModel& model, std::vector<ExprVec> init_strategies,
                      double tol = 1e-6, int max_iter = 100);

}  // namespace idg
