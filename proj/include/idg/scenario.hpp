#pragma once

#include "idg/game.hpp"
#include "idg/offline.hpp"
#include "idg/online.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace idg {

/// Schema violation, dimension mismatch or expression error, annotated with
/// the offending field path.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(const std::string& field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct DemoPlan {
  std::vector<Eigen::VectorXd> inits;
  double segment_T = 2.0;
  double h = 1e-3;
  double dt = 1e-3;
  std::optional<std::filesystem::path> load_csv;  // replaces generation
};

struct OfflineOptions {
  double rank_rtol = 1e-8;
  double split_tol = 1e-9;
  double pi_tol = 1e-6;
  int pi_max_iter = 100;
  std::vector<WSelection> w;  // per player; missing entries mean search
};

struct Scenario {
  int schema_version = 1;
  std::string name;
  std::uint64_t seed = 0;
  GameModel model;
  std::vector<std::optional<Expr>> cost_offsets;  // per player
  DemoPlan demos;
  OfflineOptions offline;
  OnlineConfig online;
  Diagnostics diagnostics;  // validate(model), attached at load

  WSelection w_selection(int player) const;
};

Scenario load_scenario(const std::filesystem::path& path);
Scenario load_scenario_string(const std::string& json_text, const std::string& origin);
std::string serialize_scenario(const Scenario& scenario);

/// Applies dotted-path overrides (e.g. "online.kappa=0.01", "seed=7") onto
/// the raw scenario JSON before parsing. Values parse as JSON when possible,
/// else as strings.
std::string apply_overrides(const std::string& json_text,
                            const std::vector<std::string>& overrides);

}  // namespace idg
