#pragma once

#include "idg/offline.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

namespace idg {

struct ExcitationConfig {
  double amplitude = 3.0;
  int sines_per_channel = 3;
  double freq_min_hz = 0.5;
  double freq_max_hz = 5.0;
};

struct OnlineConfig {
  std::vector<double> tau;    // per player FNE learning rate (broadcast if size 1)
  std::vector<double> kappa;  // per player HJB learning rate
  double h = 1e-3;
  double window_T = 1.0;          // stopping window length in seconds
  double stop_threshold = 1e-3;   // applied to both stopping metrics
  double horizon = 16.0;
  ExcitationConfig excitation;
  std::uint64_t seed = 0;
  int trace_decimation = 10;      // keep every k-th sample in the trace

  double tau_for(int player) const;
  double kappa_for(int player) const;
};

/// Deterministic sum-of-sines excitation component. Frequencies are drawn
/// uniformly from [freq_min, freq_max] per (channel, reset_index) from a
/// stream derived from the seed, identically across runs and platforms.
double excitation_value(const ExcitationConfig& cfg, std::uint64_t seed, double t,
                        int channel, int reset_index);

/// Frequencies behind excitation_value, exposed for diagnostics and tests.
std::vector<double> excitation_frequencies(const ExcitationConfig& cfg,
                                           std::uint64_t seed, int channel,
                                           int reset_index);

/// One explicit-Euler step of theta_dot = -tau M^T M theta + tau M^T z.
Eigen::VectorXd fne_adapt_step(const Eigen::VectorXd& theta_bar,
                               const Eigen::MatrixXd& m_u, const Eigen::VectorXd& z_u,
                               double h, double tau);

/// One explicit-Euler step of eta_dot = -kappa m m^T eta + kappa m z.
Eigen::VectorXd hjb_adapt_step(const Eigen::VectorXd& eta, const Eigen::VectorXd& m,
                               double z, double h, double kappa);

/// Ring buffer of parameter samples spanning the last 2T seconds; the
/// stopping metric is the normalized difference of the two window integrals
/// (trapezoidal quadrature).
class StoppingBuffer {
 public:
  StoppingBuffer(double window_T, double h);
  void push(const Eigen::VectorXd& value);
  bool full() const;
  double metric() const;  // throws if the buffer is not yet full

 private:
  double h_;
  std::size_t half_count_;  // samples per window interval
  std::deque<Eigen::VectorXd> samples_;
};

struct PeDiagnostic {
  double lambda_min = 0.0;
  Eigen::VectorXd eigenvalues;  // of the windowed Gram integral, ascending
  int excited_dim = 0;          // eigenvalues above rel. tolerance
};

/// Trapezoidal estimate of the information matrix integral over a window of
/// regressor samples. Columns of each sample: one regressor instant (a
/// vector regressor is a single column).
PeDiagnostic pe_diagnostic(const std::vector<Eigen::MatrixXd>& regressor_window,
                           double h, double rel_tol = 1e-8);

struct OnlinePlayerTrace {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> theta_bar;
  std::vector<Eigen::VectorXd> eta;
  std::vector<double> stop_metric_fne;  // -1 before the buffer is full
  std::vector<double> stop_metric_hjb;
  std::vector<char> frozen_fne;
  std::vector<char> frozen_hjb;
};

struct OnlinePlayerResult {
  Eigen::VectorXd theta_bar;
  Eigen::VectorXd eta;
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  std::optional<Eigen::VectorXd> theta_r;
  bool fne_frozen = false, hjb_frozen = false;
  double fne_freeze_time = -1.0, hjb_freeze_time = -1.0;
  double last_metric_fne = -1.0, last_metric_hjb = -1.0;
  PeDiagnostic pe_fne;
  PeDiagnostic pe_hjb;
  Eigen::VectorXd eta_min, eta_max;      // excursion band over the run
  std::vector<double> negative_alpha_times;  // samples with a negative self weight
  bool nonfinite = false;
  double nonfinite_time = -1.0;
  OnlinePlayerTrace trace;
};

struct OnlineRunResult {
  std::vector<OnlinePlayerResult> players;
  bool all_frozen = false;
};

/// Advances the plant (ground-truth closed loop with resets), the strategy
/// adaptation and the cost adaptation on a shared clock. The HJB data path
/// is evaluated at the excitation state; plant and strategy law always use
/// the true closed-loop state. Requires the full-rank (reduced) branch.
OnlineRunResult run_online_adaptation(const GameModel& model,
                                      const std::vector<ExprVec>& gt_strategies,
                                      const std::vector<Eigen::VectorXd>& inits,
                                      double segment_T,
                                      const std::vector<BasisSplit>& splits,
                                      const OnlineConfig& cfg,
                                      const std::vector<std::optional<Expr>>& cost_offsets,
                                      const std::vector<Eigen::VectorXd>* theta_bar_init =
                                          nullptr);

}  // namespace idg
