#include "idg/game.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace idg {

int Dynamics::total_control_dim() const {
  int p = 0;
  for (const ExprMat& gi : g) p += gi.cols();
  return p;
}

int Dynamics::control_offset(int player) const {
  int off = 0;
  for (int j = 0; j < player; j++) off += control_dim(j);
  return off;
}

std::vector<Eigen::VectorXd> DomainBox::grid_points() const {
  const int n = static_cast<int>(lower.size());
  std::vector<int> counts(static_cast<std::size_t>(n));
  long total = 1;
  for (int d = 0; d < n; d++) {
    if (!(lower[d] < upper[d])) throw std::invalid_argument("domain box: lower >= upper");
    if (!(step[d] > 0)) throw std::invalid_argument("domain box: step must be positive");
    counts[static_cast<std::size_t>(d)] =
        static_cast<int>(std::floor((upper[d] - lower[d]) / step[d] + 1e-9)) + 1;
    total *= counts[static_cast<std::size_t>(d)];
  }
  std::vector<Eigen::VectorXd> points;
  points.reserve(static_cast<std::size_t>(total));
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  for (long k = 0; k < total; k++) {
    Eigen::VectorXd x(n);
    for (int d = 0; d < n; d++) x[d] = lower[d] + step[d] * idx[static_cast<std::size_t>(d)];
    points.push_back(std::move(x));
    for (int d = n - 1; d >= 0; d--) {
      if (++idx[static_cast<std::size_t>(d)] < counts[static_cast<std::size_t>(d)]) break;
      idx[static_cast<std::size_t>(d)] = 0;
    }
  }
  return points;
}

bool DomainBox::contains_origin() const {
  for (Eigen::Index d = 0; d < lower.size(); d++)
    if (lower[d] > 0 || upper[d] < 0) return false;
  return true;
}

Eigen::VectorXd GameModel::r_self(int player) const {
  int off = dynamics.control_offset(player);
  int p_i = dynamics.control_dim(player);
  return players[static_cast<std::size_t>(player)].r_diag.segment(off, p_i);
}

Expr GameModel::gt_value_function(int player) const {
  const PlayerModel& pm = players[static_cast<std::size_t>(player)];
  if (pm.value_expr) return *pm.value_expr;
  if (pm.theta) return dot(*pm.theta, pm.value_basis);
  throw std::logic_error("model has no ground-truth value function for player " +
                         std::to_string(player + 1));
}

ExprVec GameModel::gt_strategy(int player) const {
  return strategy_from_value(gt_value_function(player), r_self(player),
                             dynamics.g[static_cast<std::size_t>(player)]);
}

std::vector<ExprVec> GameModel::gt_strategies() const {
  std::vector<ExprVec> out;
  out.reserve(static_cast<std::size_t>(num_players()));
  for (int i = 0; i < num_players(); i++) out.push_back(gt_strategy(i));
  return out;
}

ExprVec strategy_from_value(const Expr& value, const Eigen::VectorXd& r_ii,
                            const ExprMat& g_i) {
  if (r_ii.size() != g_i.cols())
    throw std::invalid_argument("strategy_from_value: R_ii size mismatch");
  for (Eigen::Index k = 0; k < r_ii.size(); k++)
    if (!(r_ii[k] > 0))
      throw std::invalid_argument("strategy_from_value: R_ii entries must be positive");
  const int n = g_i.rows();
  ExprVec grad = gradient(value, std::max(n, value.min_state_dim()));
  ExprVec mu(g_i.cols());
  for (int k = 0; k < g_i.cols(); k++) {
    Expr acc = Expr::constant(0.0);
    for (int row = 0; row < n; row++) acc = acc + g_i(row, k) * grad[row];
    mu[k] = Expr::constant(-0.5 / r_ii[k]) * acc;
  }
  return mu;
}

Diagnostics validate(const GameModel& model) {
  Diagnostics diag;
  const Dynamics& dyn = model.dynamics;
  const int p = dyn.total_control_dim();

  Eigen::VectorXd origin = Eigen::VectorXd::Zero(dyn.state_dim);
  diag.f_origin_norm = dyn.f.eval(origin).norm();
  if (diag.f_origin_norm > 1e-12)
    diag.failures.push_back({"dynamics.f", "f(0) != 0"});

  for (int i = 0; i < model.num_players(); i++) {
    const PlayerModel& pm = model.players[static_cast<std::size_t>(i)];
    std::string where = "players[" + std::to_string(i + 1) + "]";
    if (pm.r_diag.size() != p) {
      diag.failures.push_back({where + ".r_diag", "length != total control dim"});
      continue;
    }
    Eigen::VectorXd r_self = model.r_self(i);
    for (Eigen::Index k = 0; k < r_self.size(); k++)
      if (!(r_self[k] > 0))
        diag.failures.push_back({where + ".r_diag", "self entry <= 0"});
    for (Eigen::Index k = 0; k < pm.r_diag.size(); k++)
      if (pm.r_diag[k] < 0)
        diag.failures.push_back({where + ".r_diag", "cross entry < 0"});
  }

  // Grid positivity of Q_i away from a ball of radius 0.1 around the origin.
  std::vector<Eigen::VectorXd> grid = model.domain.grid_points();
  for (int i = 0; i < model.num_players(); i++) {
    const PlayerModel& pm = model.players[static_cast<std::size_t>(i)];
    double min_q = std::numeric_limits<double>::infinity();
    for (const Eigen::VectorXd& x : grid) {
      if (x.norm() <= 0.1) continue;
      double q = pm.beta.dot(pm.cost_basis.eval(x));
      min_q = std::min(min_q, q);
    }
    diag.min_q_on_grid.push_back(min_q);
    if (!(min_q > 0))
      diag.failures.push_back({"players[" + std::to_string(i + 1) + "].beta",
                               "Q not positive on grid"});
  }

  // mu(0) = 0 whenever a GT value function is available.
  for (int i = 0; i < model.num_players(); i++) {
    const PlayerModel& pm = model.players[static_cast<std::size_t>(i)];
    if (!pm.theta && !pm.value_expr) {
      diag.mu_origin_norm.push_back(0.0);
      continue;
    }
    bool r_ok = true;
    Eigen::VectorXd r_self = model.r_self(i);
    for (Eigen::Index k = 0; k < r_self.size(); k++)
      if (!(r_self[k] > 0)) r_ok = false;
    if (!r_ok) {
      diag.mu_origin_norm.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    double nrm = model.gt_strategy(i).eval(origin).norm();
    diag.mu_origin_norm.push_back(nrm);
    if (nrm > 1e-12)
      diag.failures.push_back({"players[" + std::to_string(i + 1) + "]", "mu(0) != 0"});
  }

  return diag;
}

}  // namespace idg
