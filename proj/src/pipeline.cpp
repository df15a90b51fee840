#include "idg/pipeline.hpp"

#include "idg/io_util.hpp"
#include "idg/linalg.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>

namespace idg {

using json = nlohmann::ordered_json;

namespace {

std::vector<Eigen::VectorXd> probe_set(const GameModel& model,
                                       const Demonstrations& demos) {
  std::vector<Eigen::VectorXd> probes = model.domain.grid_points();
  for (const Demonstrations::Segment& seg : demos.segments)
    for (Eigen::Index k = 0; k < seg.states.rows(); k += 16)
      probes.push_back(seg.states.row(k).transpose());
  return probes;
}

Nsae nsae_common_prefix(const Trajectory& ref, const Trajectory& est, bool* truncated) {
  if (ref.steps() == est.steps()) {
    if (truncated) *truncated = false;
    return nsae(ref, est);
  }
  if (truncated) *truncated = true;
  int k = std::min(ref.steps(), est.steps());
  Trajectory r = ref, e = est;
  r.states.conservativeResize(k, Eigen::NoChange);
  r.controls.conservativeResize(k, Eigen::NoChange);
  r.segment.resize(static_cast<std::size_t>(k));
  e.states.conservativeResize(k, Eigen::NoChange);
  e.controls.conservativeResize(k, Eigen::NoChange);
  e.segment.resize(static_cast<std::size_t>(k));
  return nsae(r, e);
}

GameModel with_identified_costs(const GameModel& base,
                                const std::vector<Eigen::VectorXd>& alpha,
                                const std::vector<Eigen::VectorXd>& beta) {
  GameModel model = base;
  for (std::size_t i = 0; i < model.players.size(); i++) {
    model.players[i].r_diag = alpha[i];
    model.players[i].beta = beta[i];
    model.players[i].theta.reset();
    model.players[i].value_expr.reset();
  }
  return model;
}

ExprVec strategy_from_theta_bar(const ExprMat& phi_bar, const Eigen::VectorXd& theta_bar) {
  ExprVec mu(phi_bar.rows());
  for (int k = 0; k < phi_bar.rows(); k++) {
    Expr acc = Expr::constant(0.0);
    for (int c = 0; c < phi_bar.cols(); c++)
      acc = acc + Expr::constant(theta_bar[c]) * phi_bar(k, c);
    mu[k] = Expr::constant(-0.5) * acc;
  }
  return mu;
}

json vec_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); i++) out.push_back(v[i]);
  return out;
}

json mat_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); r++) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); c++) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

json nsae_json(const Nsae& n) {
  return {{"state", n.state_error},
          {"control", n.control_error},
          {"zero_reference_channel", n.zero_reference_channel}};
}

json offline_json(const OfflineReport& rep) {
  json j;
  j["schema_version"] = 1;
  j["kind"] = "offline_report";
  j["scenario"] = rep.scenario_name;
  j["seed"] = rep.seed;
  json players = json::array();
  for (const OfflinePlayerReport& pr : rep.players) {
    json p;
    p["reduced_indices"] = pr.split.reduced;
    p["vanishing_indices"] = pr.split.vanishing;
    p["probe_evidence"] = pr.split.probe_evidence;
    p["rank"] = pr.fne.rank;
    p["full_rank"] = pr.fne.full_rank;
    p["theta_bar"] = vec_json(pr.fne.theta_bar);
    p["fne_residual"] = pr.fne.residual;
    if (pr.fne.theta_r) p["theta_r"] = vec_json(*pr.fne.theta_r);
    p["reconstruction_max_error"] = pr.reconstruction_max_error;
    p["hjb_mode"] = pr.mode == HjbMode::Reduced ? "reduced" : "full";
    p["set"] = {{"particular", vec_json(pr.set.particular)},
                {"null_basis", mat_json(pr.set.null_basis)},
                {"l_rows", pr.set.l_rows},
                {"rank", pr.set.rank},
                {"unique_after_projection", pr.set.unique_after_projection},
                {"residual", pr.set.residual}};
    json sel;
    sel["valid"] = pr.selected.valid;
    sel["scale_resolved"] = pr.selected.scale_resolved;
    sel["w"] = vec_json(pr.selected.w_used);
    sel["alpha"] = vec_json(pr.selected.alpha);
    sel["beta"] = vec_json(pr.selected.beta);
    sel["eta"] = vec_json(pr.selected.eta);
    if (!pr.selected.rejection.empty()) sel["rejection"] = pr.selected.rejection;
    if (pr.selected.valid_interval)
      sel["valid_w_interval"] = {pr.selected.valid_interval->first,
                                 pr.selected.valid_interval->second};
    p["selected"] = sel;
    players.push_back(std::move(p));
  }
  j["players"] = players;
  j["verification"] = {{"pi_converged", rep.pi_converged},
                       {"pi_iterations", rep.pi_iterations},
                       {"pi_residual_max", rep.pi_residual_max},
                       {"idg_diverged", rep.idg_diverged},
                       {"nsae_idg_vs_gt", nsae_json(rep.nsae_idg_vs_gt)},
                       {"nsae_ident_vs_gt", nsae_json(rep.nsae_ident_vs_gt)},
                       {"nsae_idg_vs_ident", nsae_json(rep.nsae_idg_vs_ident)}};
  j["errors"] = rep.errors;
  return j;
}

}  // namespace

OfflineReport run_offline(const Scenario& scenario) {
  OfflineReport rep;
  rep.scenario_name = scenario.name;
  rep.seed = scenario.seed;
  const GameModel& model = scenario.model;
  const Dynamics& dyn = model.dynamics;

  try {
    std::vector<ExprVec> gt_strategies = model.gt_strategies();
    if (scenario.demos.load_csv) {
      rep.gt_trajectory = read_trajectory_csv(*scenario.demos.load_csv);
    } else {
      rep.gt_trajectory = integrate_closed_loop(dyn, gt_strategies, scenario.demos.inits,
                                                scenario.demos.segment_T, scenario.demos.h);
    }
    if (rep.gt_trajectory.diverged) {
      rep.errors.push_back("ground-truth trajectory diverged at t=" +
                           std::to_string(rep.gt_trajectory.divergence_time));
      return rep;
    }
    Demonstrations demos = sample(rep.gt_trajectory, scenario.demos.dt);
    std::vector<Eigen::VectorXd> grid = model.domain.grid_points();
    std::vector<Eigen::VectorXd> probes = probe_set(model, demos);

    // Stage 1: strategy identification per player.
    std::vector<ExprVec> mu_hat;
    std::vector<ExprMat> phi_bars;
    for (int i = 0; i < model.num_players(); i++) {
      const PlayerModel& pm = model.players[static_cast<std::size_t>(i)];
      OfflinePlayerReport pr;
      pr.split = split_basis(pm.value_basis, dyn.g[static_cast<std::size_t>(i)], probes,
                             scenario.offline.split_tol);
      ExprMat phi_r = reduced_strategy_basis(pm.value_basis, pr.split,
                                             dyn.g[static_cast<std::size_t>(i)]);
      ExprMat phi_bar = stack_strategy_blocks(phi_r);
      FneData data = assemble_fne_data(demos, phi_bar, dyn.control_offset(i),
                                       dyn.control_dim(i));
      pr.fne = identify_fne(data, phi_bar, scenario.offline.rank_rtol);
      pr.mode = pr.fne.full_rank ? HjbMode::Reduced : HjbMode::Full;

      double recon = 0.0;
      for (const Demonstrations::Segment& seg : demos.segments)
        for (Eigen::Index k = 0; k < seg.states.rows(); k++) {
          Eigen::VectorXd x = seg.states.row(k).transpose();
          Eigen::VectorXd err = pr.fne.strategy.eval(x) -
                                seg.controls.row(k)
                                    .segment(dyn.control_offset(i), dyn.control_dim(i))
                                    .transpose();
          recon = std::max(recon, err.norm());
        }
      pr.reconstruction_max_error = recon;

      mu_hat.push_back(pr.fne.strategy);
      phi_bars.push_back(phi_bar);
      rep.players.push_back(std::move(pr));
    }

    // Stage 2: HJB solution sets and parameter selection per player.
    std::vector<Eigen::VectorXd> alpha, beta;
    for (int i = 0; i < model.num_players(); i++) {
      const PlayerModel& pm = model.players[static_cast<std::size_t>(i)];
      OfflinePlayerReport& pr = rep.players[static_cast<std::size_t>(i)];
      HjbData hjb = assemble_hjb_data(dyn, pm.cost_basis, pm.value_basis, pr.split, mu_hat,
                                      pr.fne.theta_r, grid, pr.mode,
                                      scenario.cost_offsets[static_cast<std::size_t>(i)]);
      pr.set = solve_solution_set(hjb, scenario.offline.rank_rtol);
      pr.selected = select_parameters(pr.set, scenario.w_selection(i), model, i, grid);
      alpha.push_back(pr.selected.alpha);
      beta.push_back(pr.selected.beta);
    }

    // Stage 3: forward verification with the identified parameters.
    GameModel verif = with_identified_costs(model, alpha, beta);
    PiResult pi = solve_fne_pi(verif, mu_hat, scenario.offline.pi_tol,
                               scenario.offline.pi_max_iter);
    rep.pi_converged = pi.converged;
    rep.pi_iterations = pi.iterations;
    rep.pi_residual_max = pi.hjb_residual_max;

    rep.idg_trajectory = integrate_closed_loop(dyn, pi.strategies, scenario.demos.inits,
                                               scenario.demos.segment_T, scenario.demos.h);
    rep.ident_trajectory = integrate_closed_loop(dyn, mu_hat, scenario.demos.inits,
                                                 scenario.demos.segment_T, scenario.demos.h);
    rep.idg_diverged = rep.idg_trajectory.diverged;
    if (rep.idg_diverged)
      rep.errors.push_back("verified FNE trajectory diverged at t=" +
                           std::to_string(rep.idg_trajectory.divergence_time));
    bool truncated = false;
    rep.nsae_idg_vs_gt = nsae_common_prefix(rep.gt_trajectory, rep.idg_trajectory, &truncated);
    rep.nsae_ident_vs_gt = nsae_common_prefix(rep.gt_trajectory, rep.ident_trajectory, nullptr);
    rep.nsae_idg_vs_ident = nsae_common_prefix(rep.ident_trajectory, rep.idg_trajectory, nullptr);
  } catch (const std::exception& e) {
    rep.errors.push_back(e.what());
  }
  return rep;
}

OnlineReport run_online(const Scenario& scenario) {
  OnlineReport rep;
  rep.scenario_name = scenario.name;
  rep.seed = scenario.seed;
  rep.offline = run_offline(scenario);
  const GameModel& model = scenario.model;
  const Dynamics& dyn = model.dynamics;

  try {
    if (!rep.offline.ok())
      throw std::runtime_error("offline stage failed: " + rep.offline.errors.front());
    for (const OfflinePlayerReport& pr : rep.offline.players)
      if (!pr.fne.full_rank)
        throw std::runtime_error(
            "online adaptation requires the full-rank (reduced) branch");

    std::vector<BasisSplit> splits;
    for (const OfflinePlayerReport& pr : rep.offline.players) splits.push_back(pr.split);

    OnlineRunResult run = run_online_adaptation(model, model.gt_strategies(),
                                                scenario.demos.inits, scenario.demos.segment_T,
                                                splits, scenario.online,
                                                scenario.cost_offsets);
    rep.all_frozen = run.all_frozen;

    std::vector<Eigen::VectorXd> alpha, beta;
    std::vector<ExprVec> mu_hat_online;
    for (int i = 0; i < model.num_players(); i++) {
      OnlinePlayerReport pr;
      pr.state = run.players[static_cast<std::size_t>(i)];
      const OfflinePlayerReport& off = rep.offline.players[static_cast<std::size_t>(i)];
      pr.membership_residual = membership_residual(off.set, pr.state.eta);
      double off_norm = std::max(off.fne.theta_bar.norm(), 1e-12);
      pr.theta_bar_offline_distance =
          (pr.state.theta_bar - off.fne.theta_bar).norm() / off_norm;
      pr.discrepancy_flag = pr.theta_bar_offline_distance > 0.1;
      alpha.push_back(pr.state.alpha);
      beta.push_back(pr.state.beta);

      ExprMat phi_r = reduced_strategy_basis(model.players[static_cast<std::size_t>(i)].value_basis,
                                             off.split, dyn.g[static_cast<std::size_t>(i)]);
      mu_hat_online.push_back(
          strategy_from_theta_bar(stack_strategy_blocks(phi_r), pr.state.theta_bar));
      rep.players.push_back(std::move(pr));
      if (rep.players.back().state.nonfinite)
        rep.errors.push_back("player " + std::to_string(i + 1) +
                             " learner state became non-finite at t=" +
                             std::to_string(rep.players.back().state.nonfinite_time));
    }

    bool alpha_usable = true;
    for (int i = 0; i < model.num_players(); i++) {
      Eigen::VectorXd self =
          alpha[static_cast<std::size_t>(i)].segment(dyn.control_offset(i), dyn.control_dim(i));
      if (!self.allFinite() || (self.array() <= 0.0).any()) alpha_usable = false;
    }
    if (alpha_usable) {
      GameModel verif = with_identified_costs(model, alpha, beta);
      PiResult pi = solve_fne_pi(verif, mu_hat_online, scenario.offline.pi_tol,
                                 scenario.offline.pi_max_iter);
      rep.pi_converged = pi.converged;
      rep.pi_iterations = pi.iterations;
      rep.online_idg_trajectory =
          integrate_closed_loop(dyn, pi.strategies, scenario.demos.inits,
                                scenario.demos.segment_T, scenario.demos.h);
      rep.idg_diverged = rep.online_idg_trajectory.diverged;
      bool truncated = false;
      rep.nsae_online_vs_gt =
          nsae_common_prefix(rep.offline.gt_trajectory, rep.online_idg_trajectory, &truncated);
      if (truncated)
        rep.errors.push_back("online-verified trajectory diverged; NSAE on common prefix");
    } else {
      rep.errors.push_back(
          "online parameters do not define a solvable game (nonpositive self weights)");
    }
  } catch (const std::exception& e) {
    rep.errors.push_back(e.what());
  }
  return rep;
}

VerifyReport run_verify(const Scenario& scenario) {
  const GameModel& model = scenario.model;
  std::vector<ExprVec> gt = model.gt_strategies();
  Trajectory gt_traj = integrate_closed_loop(model.dynamics, gt, scenario.demos.inits,
                                             scenario.demos.segment_T, scenario.demos.h);
  PiResult pi = solve_fne_pi(model, gt, scenario.offline.pi_tol, scenario.offline.pi_max_iter);
  Trajectory est = integrate_closed_loop(model.dynamics, pi.strategies, scenario.demos.inits,
                                         scenario.demos.segment_T, scenario.demos.h);
  VerifyReport rep;
  rep.pi_converged = pi.converged;
  rep.pi_iterations = pi.iterations;
  rep.pi_residual_max = pi.hjb_residual_max;
  rep.nsae = nsae_common_prefix(gt_traj, est, nullptr);
  return rep;
}

std::string serialize_report(const OfflineReport& report) {
  return offline_json(report).dump(2) + "\n";
}

std::string serialize_report(const OnlineReport& report) {
  json j;
  j["schema_version"] = 1;
  j["kind"] = "online_report";
  j["scenario"] = report.scenario_name;
  j["seed"] = report.seed;
  json players = json::array();
  for (const OnlinePlayerReport& pr : report.players) {
    json p;
    p["theta_bar"] = vec_json(pr.state.theta_bar);
    p["eta"] = vec_json(pr.state.eta);
    p["alpha"] = vec_json(pr.state.alpha);
    p["beta"] = vec_json(pr.state.beta);
    if (pr.state.theta_r) p["theta_r"] = vec_json(*pr.state.theta_r);
    p["fne_frozen"] = pr.state.fne_frozen;
    p["hjb_frozen"] = pr.state.hjb_frozen;
    p["fne_freeze_time"] = pr.state.fne_freeze_time;
    p["hjb_freeze_time"] = pr.state.hjb_freeze_time;
    p["last_metric_fne"] = pr.state.last_metric_fne;
    p["last_metric_hjb"] = pr.state.last_metric_hjb;
    p["membership_residual"] = pr.membership_residual;
    p["theta_bar_offline_distance"] = pr.theta_bar_offline_distance;
    p["discrepancy_flag"] = pr.discrepancy_flag;
    p["eta_min"] = vec_json(pr.state.eta_min);
    p["eta_max"] = vec_json(pr.state.eta_max);
    p["negative_alpha_times"] = pr.state.negative_alpha_times;
    p["nonfinite"] = pr.state.nonfinite;
    p["pe_fne"] = {{"lambda_min", pr.state.pe_fne.lambda_min},
                   {"excited_dim", pr.state.pe_fne.excited_dim},
                   {"eigenvalues", vec_json(pr.state.pe_fne.eigenvalues)}};
    p["pe_hjb"] = {{"lambda_min", pr.state.pe_hjb.lambda_min},
                   {"excited_dim", pr.state.pe_hjb.excited_dim},
                   {"eigenvalues", vec_json(pr.state.pe_hjb.eigenvalues)}};
    players.push_back(std::move(p));
  }
  j["players"] = players;
  j["all_frozen"] = report.all_frozen;
  j["verification"] = {{"pi_converged", report.pi_converged},
                       {"pi_iterations", report.pi_iterations},
                       {"idg_diverged", report.idg_diverged},
                       {"nsae_online_vs_gt", nsae_json(report.nsae_online_vs_gt)}};
  j["offline"] = offline_json(report.offline);
  j["errors"] = report.errors;
  return j.dump(2) + "\n";
}

void write_learning_trace_csv(const OnlineReport& report,
                              const std::filesystem::path& path) {
  std::ostringstream os;
  int theta_dim = 0, eta_dim = 0;
  for (const OnlinePlayerReport& pr : report.players) {
    theta_dim = std::max(theta_dim, static_cast<int>(pr.state.theta_bar.size()));
    eta_dim = std::max(eta_dim, static_cast<int>(pr.state.eta.size()));
  }
  os << "t,player";
  for (int c = 0; c < theta_dim; c++) os << ",theta_bar" << (c + 1);
  for (int c = 0; c < eta_dim; c++) os << ",eta" << (c + 1);
  os << ",stop_metric_fne,stop_metric_hjb,frozen_fne,frozen_hjb\n";
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << ',' << buf;
  };
  for (std::size_t i = 0; i < report.players.size(); i++) {
    const OnlinePlayerTrace& tr = report.players[i].state.trace;
    for (std::size_t k = 0; k < tr.t.size(); k++) {
      std::snprintf(buf, sizeof(buf), "%.17g", tr.t[k]);
      os << buf << ',' << (i + 1);
      for (int c = 0; c < theta_dim; c++)
        put(c < tr.theta_bar[k].size() ? tr.theta_bar[k][c] : 0.0);
      for (int c = 0; c < eta_dim; c++) put(c < tr.eta[k].size() ? tr.eta[k][c] : 0.0);
      put(tr.stop_metric_fne[k]);
      put(tr.stop_metric_hjb[k]);
      os << ',' << int(tr.frozen_fne[k]) << ',' << int(tr.frozen_hjb[k]) << '\n';
    }
  }
  write_file_atomic(path, os.str());
}

}  // namespace idg
