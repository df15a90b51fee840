#include "idg/offline.hpp"

#include "idg/linalg.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace idg {

BasisSplit split_basis(const ExprVec& phi, const ExprMat& g_i,
                       const std::vector<Eigen::VectorXd>& probes, double tol) {
  if (probes.empty()) throw std::invalid_argument("split_basis: probe set is empty");
  const int n = g_i.rows();
  BasisSplit split;
  split.probe_evidence.resize(static_cast<std::size_t>(phi.size()), 0.0);
  for (int j = 0; j < phi.size(); j++) {
    ExprVec grad = gradient(phi[j], n);
    double evidence = 0.0;
    for (const Eigen::VectorXd& x : probes) {
      Eigen::VectorXd gij = g_i.eval(x).transpose() * grad.eval(x);
      evidence = std::max(evidence, gij.norm());
    }
    split.probe_evidence[static_cast<std::size_t>(j)] = evidence;
    if (evidence > tol)
      split.reduced.push_back(j);
    else
      split.vanishing.push_back(j);
  }
  return split;
}

ExprMat reduced_strategy_basis(const ExprVec& phi, const BasisSplit& split,
                               const ExprMat& g_i) {
  const int n = g_i.rows();
  const int p = g_i.cols();
  ExprMat out(p, split.h_bar());
  for (int c = 0; c < split.h_bar(); c++) {
    ExprVec grad = gradient(phi[split.reduced[static_cast<std::size_t>(c)]], n);
    for (int k = 0; k < p; k++) {
      Expr acc = Expr::constant(0.0);
      for (int row = 0; row < n; row++) acc = acc + g_i(row, k) * grad[row];
      out(k, c) = acc;
    }
  }
  return out;
}

ExprMat stack_strategy_blocks(const ExprMat& phi_r) {
  const int p = phi_r.rows();
  const int h_bar = phi_r.cols();
  ExprMat out(p, p * h_bar);
  for (int k = 0; k < p; k++)
    for (int c = 0; c < h_bar; c++) out(k, k * h_bar + c) = phi_r(k, c);
  return out;
}

FneData assemble_fne_data(const Demonstrations& demos, const ExprMat& phi_bar,
                          int player_control_offset, int player_control_dim) {
  if (demos.segments.empty())
    throw std::invalid_argument("assemble_fne_data: no demonstrations");
  const int p_i = phi_bar.rows();
  if (p_i != player_control_dim)
    throw std::invalid_argument("assemble_fne_data: control dimension mismatch");
  const int cols = phi_bar.cols();
  const int rows = demos.total_samples() * p_i;

  FneData data;
  data.m.resize(rows, cols);
  data.z.resize(rows);
  int row = 0;
  for (const Demonstrations::Segment& seg : demos.segments) {
    for (Eigen::Index k = 0; k < seg.states.rows(); k++) {
      Eigen::VectorXd x = seg.states.row(k).transpose();
      data.m.middleRows(row, p_i) = -0.5 * phi_bar.eval(x);
      data.z.segment(row, p_i) =
          seg.controls.row(k).segment(player_control_offset, p_i).transpose();
      row += p_i;
    }
  }
  return data;
}

FneIdentResult identify_fne(const FneData& data, const ExprMat& phi_bar, double rtol) {
  const int p_i = phi_bar.rows();
  const int cols = phi_bar.cols();
  const int h_bar = cols / p_i;

  FneIdentResult res;
  Eigen::MatrixXd normal = data.m.transpose() * data.m;
  res.theta_bar = linalg::pinv(normal, rtol) * data.m.transpose() * data.z;
  res.rank = linalg::numerical_rank(data.m, rtol);
  res.full_rank = (res.rank == cols);
  res.residual = (data.m * res.theta_bar - data.z).norm();

  // mu_hat row k = -1/2 (Phi_bar row k) . theta_bar.
  ExprVec mu(p_i);
  for (int k = 0; k < p_i; k++) {
    Expr acc = Expr::constant(0.0);
    for (int c = 0; c < cols; c++)
      acc = acc + Expr::constant(res.theta_bar[c]) * phi_bar(k, c);
    mu[k] = Expr::constant(-0.5) * acc;
  }
  res.strategy = mu;

  if (res.full_rank) {
    Eigen::VectorXd first = res.theta_bar.segment(0, h_bar);
    Eigen::VectorXd avg = Eigen::VectorXd::Zero(h_bar);
    for (int j = 0; j < p_i; j++) {
      Eigen::VectorXd block = res.theta_bar.segment(j * h_bar, h_bar);
      double norm = block.norm();
      if (norm <= 1e-12)
        throw std::runtime_error("identify_fne: zero weight block in normalization");
      if (block.dot(first) < 0)
        throw std::runtime_error("identify_fne: weight blocks have opposite sign");
      avg += block / norm;
    }
    res.theta_r = avg / static_cast<double>(p_i);
  }
  return res;
}

HjbData assemble_hjb_data(const Dynamics& dyn, const ExprVec& psi_i,
                          const ExprVec& phi_i, const BasisSplit& split,
                          const std::vector<ExprVec>& strategies,
                          const std::optional<Eigen::VectorXd>& theta_r,
                          const std::vector<Eigen::VectorXd>& grid, HjbMode mode,
                          const std::optional<Expr>& cost_offset) {
  if (mode == HjbMode::Reduced && !theta_r)
    throw std::invalid_argument("assemble_hjb_data: reduced mode requires theta_r");
  if (grid.empty()) throw std::invalid_argument("assemble_hjb_data: empty grid");

  const int n = dyn.state_dim;
  const int p = dyn.total_control_dim();
  const int m = psi_i.size();
  const int h = phi_i.size();
  const int h_bar = split.h_bar();

  // Jacobians of the reduced and vanishing basis blocks, original order.
  ExprVec phi_r(split.h_bar()), phi_mr(static_cast<int>(split.vanishing.size()));
  for (int c = 0; c < split.h_bar(); c++)
    phi_r[c] = phi_i[split.reduced[static_cast<std::size_t>(c)]];
  for (std::size_t c = 0; c < split.vanishing.size(); c++)
    phi_mr[static_cast<int>(c)] = phi_i[split.vanishing[c]];
  ExprMat jac_r = jacobian(phi_r, n);
  ExprMat jac_mr = jacobian(phi_mr, n);
  ExprMat jac_full = jacobian(phi_i, n);

  const int value_cols = (mode == HjbMode::Reduced) ? (h - h_bar) : h;
  HjbData data;
  data.mode = mode;
  data.alpha_dim = p;
  data.beta_dim = m;
  data.m.resize(static_cast<Eigen::Index>(grid.size()), p + m + value_cols);
  data.z.resize(static_cast<Eigen::Index>(grid.size()));

  for (std::size_t k = 0; k < grid.size(); k++) {
    const Eigen::VectorXd& x = grid[k];
    Eigen::VectorXd u(p);
    int off = 0;
    for (int j = 0; j < dyn.num_players(); j++) {
      u.segment(off, dyn.control_dim(j)) = strategies[static_cast<std::size_t>(j)].eval(x);
      off += dyn.control_dim(j);
    }
    Eigen::VectorXd f_g = dyn.f.eval(x);
    off = 0;
    for (int j = 0; j < dyn.num_players(); j++) {
      f_g += dyn.g[static_cast<std::size_t>(j)].eval(x) * u.segment(off, dyn.control_dim(j));
      off += dyn.control_dim(j);
    }

    Eigen::Index row = static_cast<Eigen::Index>(k);
    data.m.row(row).segment(0, p) = u.cwiseAbs2().transpose();
    data.m.row(row).segment(p, m) = psi_i.eval(x).transpose();
    double target = 0.0;
    if (mode == HjbMode::Reduced) {
      if (value_cols > 0)
        data.m.row(row).segment(p + m, value_cols) = (jac_mr.eval(x) * f_g).transpose();
      target = -theta_r->dot(jac_r.eval(x) * f_g);
    } else {
      data.m.row(row).segment(p + m, value_cols) = (jac_full.eval(x) * f_g).transpose();
    }
    if (cost_offset) target -= cost_offset->eval(x);
    data.z[row] = target;
  }
  return data;
}

Eigen::VectorXd SolutionSet::element(const Eigen::VectorXd& w) const {
  if (w.size() != null_dim())
    throw std::invalid_argument("solution set element: w dimension mismatch");
  if (null_dim() == 0) return particular;
  return particular + null_basis * w;
}

SolutionSet solve_solution_set(const HjbData& data, double rtol) {
  SolutionSet set;
  set.mode = data.mode;
  set.l_rows = data.alpha_dim + data.beta_dim;
  if (data.m.size() == 0) {
    set.particular = Eigen::VectorXd::Zero(0);
    return set;
  }
  linalg::RankedFactorization f = linalg::factorize(data.m, rtol);
  set.rank = f.rank;
  set.particular = linalg::lstsq_min_norm(data.m, data.z, rtol);
  set.null_basis = f.null_basis;
  set.residual = (data.m * set.particular - data.z).norm();
  set.z_norm = data.z.norm();
  set.unique_after_projection =
      set.null_dim() == 0 ||
      set.null_basis.topRows(set.l_rows).lpNorm<Eigen::Infinity>() <= 1e-10;
  return set;
}

double membership_residual(const SolutionSet& set, const Eigen::VectorXd& eta) {
  if (eta.size() != set.particular.size())
    throw std::invalid_argument("membership_residual: dimension mismatch");
  Eigen::VectorXd d = eta - set.particular;
  if (set.null_dim() > 0) d -= set.null_basis * (set.null_basis.transpose() * d);
  return d.norm();
}

double membership_residual_alpha_beta(const SolutionSet& set,
                                      const Eigen::VectorXd& alpha_beta) {
  if (alpha_beta.size() != set.l_rows)
    throw std::invalid_argument("membership_residual_alpha_beta: dimension mismatch");
  Eigen::VectorXd d = alpha_beta - set.particular.head(set.l_rows);
  if (set.null_dim() == 0) return d.norm();
  Eigen::MatrixXd ln = set.null_basis.topRows(set.l_rows);
  Eigen::VectorXd w = linalg::lstsq_min_norm(ln, d);
  return (d - ln * w).norm();
}

namespace {

struct FilterResult {
  bool valid = true;
  std::string rejection;
};

FilterResult apply_filters(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
                           const GameModel& model, int player,
                           const std::vector<Eigen::VectorXd>& grid) {
  const int off = model.dynamics.control_offset(player);
  const int p_i = model.dynamics.control_dim(player);
  for (int k = 0; k < alpha.size(); k++) {
    bool self = (k >= off && k < off + p_i);
    if (self && !(alpha[k] > 0))
      return {false, "alpha self entry " + std::to_string(k + 1) + " not positive"};
    if (!self && alpha[k] < -1e-12)
      return {false, "alpha cross entry " + std::to_string(k + 1) + " negative"};
  }
  const ExprVec& psi = model.players[static_cast<std::size_t>(player)].cost_basis;
  for (const Eigen::VectorXd& x : grid) {
    if (x.norm() <= 0.1) continue;
    if (!(beta.dot(psi.eval(x)) > 0)) {
      std::string where = "(";
      for (Eigen::Index d = 0; d < x.size(); d++)
        where += (d ? "," : "") + std::to_string(x[d]);
      return {false, "recovered cost not positive at grid point " + where + ")"};
    }
  }
  return {true, ""};
}

}  // namespace

SelectedParameters select_parameters(const SolutionSet& set, const WSelection& wsel,
                                     const GameModel& model, int player,
                                     const std::vector<Eigen::VectorXd>& grid) {
  const int p = model.dynamics.total_control_dim();
  const bool homogeneous =
      set.mode == HjbMode::Full && set.z_norm <= 1e-12 && set.particular.norm() <= 1e-9;

  auto realize = [&](const Eigen::VectorXd& w) {
    SelectedParameters cand;
    cand.w_used = w;
    cand.eta = set.element(w);
    cand.scale_resolved = !homogeneous;
    if (homogeneous) {
      double norm = cand.eta.norm();
      if (norm <= 1e-12) {
        cand.valid = false;
        cand.rejection = "trivial all-zero solution";
        cand.alpha = Eigen::VectorXd::Zero(p);
        cand.beta = Eigen::VectorXd::Zero(set.l_rows - p);
        return cand;
      }
      cand.eta /= norm;
      // Orient the ray so the first self weight is positive.
      if (cand.eta[model.dynamics.control_offset(player)] < 0) cand.eta = -cand.eta;
    }
    cand.alpha = cand.eta.head(p);
    cand.beta = cand.eta.segment(p, set.l_rows - p);
    FilterResult f = apply_filters(cand.alpha, cand.beta, model, player, grid);
    cand.valid = f.valid;
    cand.rejection = f.rejection;
    return cand;
  };

  if (wsel.fixed) {
    if (wsel.fixed->size() != set.null_dim())
      throw std::invalid_argument("select_parameters: w dimension mismatch");
    return realize(*wsel.fixed);
  }

  SelectedParameters first = realize(Eigen::VectorXd::Zero(set.null_dim()));
  if (set.null_dim() == 0) return first;

  if (set.null_dim() == 1) {
    // Low-discrepancy scan of the w interval; w = 0 is tried first.
    constexpr double kGolden = 0.6180339887498949;
    SelectedParameters chosen = first;
    double lo_valid = std::numeric_limits<double>::infinity();
    double hi_valid = -std::numeric_limits<double>::infinity();
    if (first.valid) lo_valid = hi_valid = 0.0;
    double frac = 0.0;
    for (int k = 1; k < wsel.samples; k++) {
      frac += kGolden;
      frac -= std::floor(frac);
      Eigen::VectorXd w(1);
      w[0] = wsel.lo + (wsel.hi - wsel.lo) * frac;
      SelectedParameters cand = realize(w);
      if (cand.valid) {
        lo_valid = std::min(lo_valid, w[0]);
        hi_valid = std::max(hi_valid, w[0]);
        if (!chosen.valid) chosen = cand;
      }
    }
    if (chosen.valid) chosen.valid_interval = std::make_pair(lo_valid, hi_valid);
    if (!chosen.valid && chosen.rejection.empty())
      chosen.rejection = "no valid element in search range";
    return chosen;
  }

  // Higher-dimensional sets are reported, not searched.
  if (!first.valid)
    first.rejection += " (multi-dimensional set; only w = 0 was tried)";
  return first;
}

}  // namespace idg
