#include "idg/io_util.hpp"
#include "idg/pipeline.hpp"
#include "idg/repro.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;

namespace {

idg::Scenario load_with_overrides(const std::string& scenario_path,
                                  const std::vector<std::string>& overrides,
                                  std::optional<std::uint64_t> seed) {
  std::string text = idg::read_file(scenario_path);
  std::vector<std::string> all = overrides;
  if (seed) all.push_back("seed=" + std::to_string(*seed));
  text = idg::apply_overrides(text, all);
  return idg::load_scenario_string(text, scenario_path);
}

void report_diagnostics(const idg::Scenario& sc) {
  for (const idg::ValidationIssue& issue : sc.diagnostics.failures)
    std::cerr << "warning: model check failed: " << issue.where << ": " << issue.what
              << "\n";
}

int cmd_generate(const idg::Scenario& sc, const fs::path& out) {
  idg::Trajectory traj = idg::integrate_closed_loop(
      sc.model.dynamics, sc.model.gt_strategies(), sc.demos.inits, sc.demos.segment_T,
      sc.demos.h);
  fs::create_directories(out);
  idg::write_trajectory_csv(traj, out / (sc.name + "_gt.csv"));
  std::cout << "wrote " << (out / (sc.name + "_gt.csv")).string() << " (" << traj.steps()
            << " rows, " << traj.num_segments() << " segments)\n";
  if (traj.diverged) {
    std::cerr << "error: trajectory diverged at t=" << traj.divergence_time << "\n";
    return 1;
  }
  return 0;
}

int cmd_offline(const idg::Scenario& sc, const fs::path& out) {
  idg::OfflineReport rep = idg::run_offline(sc);
  fs::create_directories(out);
  idg::write_file_atomic(out / (sc.name + "_offline_report.json"),
                         idg::serialize_report(rep));
  idg::write_trajectory_csv(rep.gt_trajectory, out / (sc.name + "_gt.csv"));
  if (rep.idg_trajectory.steps() > 0)
    idg::write_trajectory_csv(rep.idg_trajectory, out / (sc.name + "_idg_fne.csv"));
  if (rep.ident_trajectory.steps() > 0)
    idg::write_trajectory_csv(rep.ident_trajectory, out / (sc.name + "_identified_laws.csv"));
  std::cout << "offline report: " << (out / (sc.name + "_offline_report.json")).string()
            << "\n";
  for (std::size_t i = 0; i < rep.players.size(); i++) {
    const idg::OfflinePlayerReport& pr = rep.players[i];
    std::cout << "player " << (i + 1) << ": rank=" << pr.fne.rank
              << (pr.fne.full_rank ? " (full)" : " (deficient)")
              << " null_dim=" << pr.set.null_dim()
              << " unique=" << (pr.set.unique_after_projection ? "yes" : "no")
              << " valid=" << (pr.selected.valid ? "yes" : "no") << "\n";
  }
  std::cout << "NSAE verified vs GT: dx=" << rep.nsae_idg_vs_gt.state_error
            << " du=" << rep.nsae_idg_vs_gt.control_error << "\n";
  for (const std::string& e : rep.errors) std::cerr << "error: " << e << "\n";
  return rep.ok() ? 0 : 1;
}

int cmd_online(const idg::Scenario& sc, const fs::path& out) {
  idg::OnlineReport rep = idg::run_online(sc);
  fs::create_directories(out);
  idg::write_file_atomic(out / (sc.name + "_online_report.json"),
                         idg::serialize_report(rep));
  idg::write_learning_trace_csv(rep, out / (sc.name + "_learning_trace.csv"));
  if (rep.online_idg_trajectory.steps() > 0)
    idg::write_trajectory_csv(rep.online_idg_trajectory,
                              out / (sc.name + "_online_idg_fne.csv"));
  std::cout << "online report: " << (out / (sc.name + "_online_report.json")).string()
            << "\n";
  for (std::size_t i = 0; i < rep.players.size(); i++) {
    const idg::OnlinePlayerReport& pr = rep.players[i];
    std::cout << "player " << (i + 1) << ": fne_frozen="
              << (pr.state.fne_frozen ? "t=" + std::to_string(pr.state.fne_freeze_time)
                                      : std::string("no"))
              << " hjb_frozen="
              << (pr.state.hjb_frozen ? "t=" + std::to_string(pr.state.hjb_freeze_time)
                                      : std::string("no"))
              << " membership=" << pr.membership_residual
              << (pr.discrepancy_flag ? " [offline/online discrepancy]" : "") << "\n";
  }
  std::cout << "NSAE verified vs GT: dx=" << rep.nsae_online_vs_gt.state_error
            << " du=" << rep.nsae_online_vs_gt.control_error << "\n";
  for (const std::string& e : rep.errors) std::cerr << "error: " << e << "\n";
  return rep.ok() ? 0 : 1;
}

int cmd_verify(const idg::Scenario& sc, const fs::path& out) {
  idg::VerifyReport rep = idg::run_verify(sc);
  fs::create_directories(out);
  std::cout << "PI " << (rep.pi_converged ? "converged" : "did not converge") << " in "
            << rep.pi_iterations << " iterations, max HJB residual "
            << rep.pi_residual_max << "\n";
  std::cout << "NSAE vs GT: dx=" << rep.nsae.state_error
            << " du=" << rep.nsae.control_error << "\n";
  return rep.pi_converged ? 0 : 1;
}

int cmd_repro(const fs::path& scenario_dir, const fs::path& out) {
  idg::ReproResult res = idg::repro_paper(scenario_dir);
  fs::create_directories(out);
  std::string table = idg::format_table(res.rows);
  std::cout << table;
  idg::write_file_atomic(out / "repro_summary.txt", table);
  idg::write_file_atomic(out / "sec5_errorfree_offline_report.json",
                         idg::serialize_report(res.offline_errorfree));
  idg::write_file_atomic(out / "sec5_errorfree_online_report.json",
                         idg::serialize_report(res.online_errorfree));
  idg::write_file_atomic(out / "sec5_value_error_offline_report.json",
                         idg::serialize_report(res.offline_value_error));
  idg::write_file_atomic(out / "sec5_value_error_online_report.json",
                         idg::serialize_report(res.online_value_error));
  idg::write_file_atomic(out / "sec5_cost_error_offline_report.json",
                         idg::serialize_report(res.offline_cost_error));
  idg::write_file_atomic(out / "sec5_cost_error_online_report.json",
                         idg::serialize_report(res.online_cost_error));
  if (!res.all_pass()) {
    std::cerr << "repro-paper: some rows failed\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inverse differential games: offline and online HJB-based identification"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;

  auto add_common = [&](CLI::App* cmd, bool needs_scenario) {
    if (needs_scenario)
      cmd->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "override the scenario seed");
    cmd->add_option("--set", overrides, "dotted-path override key=value");
  };

  CLI::App* generate = app.add_subcommand("generate", "simulate the GT demonstrations");
  CLI::App* offline = app.add_subcommand("offline", "run the offline identification");
  CLI::App* online = app.add_subcommand("online", "run the online adaptation");
  CLI::App* verify = app.add_subcommand("verify", "forward-solve with the scenario parameters");
  CLI::App* repro = app.add_subcommand("repro-paper", "run all bundled experiments");
  add_common(generate, true);
  add_common(offline, true);
  add_common(online, true);
  add_common(verify, true);
  repro->add_option("--out", out_dir, "output directory");
  std::string scenario_dir = "scenarios";
  repro->add_option("--scenarios", scenario_dir, "directory with the bundled scenarios");

  CLI11_PARSE(app, argc, argv);

  try {
    if (repro->parsed()) return cmd_repro(scenario_dir, out_dir);
    idg::Scenario sc = load_with_overrides(scenario_path, overrides, seed);
    report_diagnostics(sc);
    if (generate->parsed()) return cmd_generate(sc, out_dir);
    if (offline->parsed()) return cmd_offline(sc, out_dir);
    if (online->parsed()) return cmd_online(sc, out_dir);
    if (verify->parsed()) return cmd_verify(sc, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
