#pragma once

#include "idg/pipeline.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace idg {

struct ReproRow {
  std::string name;
  std::string paper_value;
  std::string computed;
  std::string tolerance;
  bool pass = false;
  bool informational = false;  // reported, not gated
};

struct ReproResult {
  std::vector<ReproRow> rows;
  OfflineReport offline_errorfree;
  OnlineReport online_errorfree;
  OfflineReport offline_value_error;
  OnlineReport online_value_error;
  OfflineReport offline_cost_error;
  OnlineReport online_cost_error;
  double offline_runtime_seconds = 0.0;

  bool all_pass() const;
};

/// Runs the four bundled experiment scenarios (error-free offline/online,
/// value-approximation, cost-approximation) and checks each published
/// quantity at its declared tolerance.
ReproResult repro_paper(const std::filesystem::path& scenario_dir);

std::string format_table(const std::vector<ReproRow>& rows);

}  // namespace idg
