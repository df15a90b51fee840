#pragma once

#include "idg/forward.hpp"
#include "idg/scenario.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace idg {

struct OfflinePlayerReport {
  BasisSplit split;
  FneIdentResult fne;
  double reconstruction_max_error = 0.0;  // max ||mu_hat(x_k) - u_k|| over samples
  HjbMode mode = HjbMode::Reduced;
  SolutionSet set;
  SelectedParameters selected;
};

struct OfflineReport {
  std::string scenario_name;
  std::uint64_t seed = 0;
  std::vector<OfflinePlayerReport> players;
  bool pi_converged = false;
  int pi_iterations = 0;
  double pi_residual_max = 0.0;
  Nsae nsae_idg_vs_gt;     // forward-verified FNE vs ground truth
  Nsae nsae_ident_vs_gt;   // identified control laws vs ground truth
  Nsae nsae_idg_vs_ident;  // forward-verified FNE vs identified laws
  bool idg_diverged = false;
  Trajectory gt_trajectory, idg_trajectory, ident_trajectory;
  std::vector<std::string> errors;

  bool ok() const { return errors.empty(); }
};

OfflineReport run_offline(const Scenario& scenario);

struct OnlinePlayerReport {
  OnlinePlayerResult state;
  double membership_residual = -1.0;          // vs the offline solution set
  double theta_bar_offline_distance = -1.0;   // relative to the offline estimate
  bool discrepancy_flag = false;
};

struct OnlineReport {
  std::string scenario_name;
  std::uint64_t seed = 0;
  std::vector<OnlinePlayerReport> players;
  bool all_frozen = false;
  Nsae nsae_online_vs_gt;  // forward-verified with the online parameters
  bool pi_converged = false;
  int pi_iterations = 0;
  bool idg_diverged = false;
  OfflineReport offline;   // same-scenario offline run backing the membership test
  Trajectory online_idg_trajectory;
  std::vector<std::string> errors;

  bool ok() const { return errors.empty(); }
};

OnlineReport run_online(const Scenario& scenario);

struct VerifyReport {
  Nsae nsae;
  bool pi_converged = false;
  int pi_iterations = 0;
  double pi_residual_max = 0.0;
};

/// Forward-solves the game with the scenario's cost parameters and compares
/// the resulting trajectories against the ground truth.
VerifyReport run_verify(const Scenario& scenario);

std::string serialize_report(const OfflineReport& report);
std::string serialize_report(const OnlineReport& report);

void write_learning_trace_csv(const OnlineReport& report,
                              const std::filesystem::path& path);

}  // namespace idg
