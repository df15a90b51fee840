#pragma once

#include "idg/expr.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace idg {

/// Input-affine dynamics xdot = f(x) + sum_i G_i(x) u_i.
struct Dynamics {
  int state_dim = 0;        // n
  ExprVec f;                // n expressions
  std::vector<ExprMat> g;   // per player, n x p_i

  int num_players() const { return static_cast<int>(g.size()); }
  int control_dim(int player) const { return g[static_cast<std::size_t>(player)].cols(); }
  int total_control_dim() const;
  /// Column offset of player j's control block inside the stacked u.
  int control_offset(int player) const;
};

/// One player's bases and (ground-truth) cost parameters. `r_diag` holds the
/// diagonals of R_ij for all j stacked in player order (length p); self
/// entries are the block at the player's own control offset.
struct PlayerModel {
  ExprVec value_basis;              // phi_i, h_i entries
  ExprVec cost_basis;               // psi_i, m_i entries
  Eigen::VectorXd r_diag;           // alpha_i, length p
  Eigen::VectorXd beta;             // beta_i, length m_i
  std::optional<Eigen::VectorXd> theta;  // GT value weights over phi_i
  std::optional<Expr> value_expr;        // GT value function, possibly off-basis

  int value_dim() const { return value_basis.size(); }
  int cost_dim() const { return cost_basis.size(); }
};

/// Axis-aligned evaluation region with a per-dimension grid step.
struct DomainBox {
  Eigen::VectorXd lower, upper, step;

  /// Full tensor grid, row-major over dimensions.
  std::vector<Eigen::VectorXd> grid_points() const;
  bool contains_origin() const;
};

struct GameModel {
  Dynamics dynamics;
  std::vector<PlayerModel> players;
  DomainBox domain;

  int num_players() const { return static_cast<int>(players.size()); }
  /// R_ii diagonal of player i (segment of r_diag at the player's offset).
  Eigen::VectorXd r_self(int player) const;
  /// GT value function of player i: theta_i . phi_i or the raw expression.
  Expr gt_value_function(int player) const;
  /// GT feedback strategy derived symbolically from the GT value function.
  ExprVec gt_strategy(int player) const;
  std::vector<ExprVec> gt_strategies() const;
};

/// mu_i = -1/2 R_ii^-1 G_i^T (dV/dx)^T, component k uses G column k and
/// r_ii entry k.
ExprVec strategy_from_value(const Expr& value, const Eigen::VectorXd& r_ii,
                            const ExprMat& g_i);

struct ValidationIssue {
  std::string where;
  std::string what;
};

struct Diagnostics {
  std::vector<ValidationIssue> failures;
  std::vector<double> min_q_on_grid;   // per player, excludes ball around origin
  double f_origin_norm = 0.0;
  std::vector<double> mu_origin_norm;  // per player

  bool ok() const { return failures.empty(); }
};

/// Structural and sampled checks: R_ii > 0, R_ij >= 0, f(0)=0, mu(0)=0,
/// and grid positivity of each Q_i away from the origin. Never throws for
/// model defects; returns them as a failure list.
Diagnostics validate(const GameModel& model);

}  // namespace idg
