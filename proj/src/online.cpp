#include "idg/online.hpp"

#include "idg/linalg.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace idg {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double uniform01(std::uint64_t& state) {
  return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
}

std::uint64_t stream_seed(std::uint64_t seed, int channel, int reset_index) {
  std::uint64_t s = seed;
  s ^= splitmix64(s) + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(reset_index + 1);
  s ^= splitmix64(s) + 0xC2B2AE3D27D4EB4FULL * static_cast<std::uint64_t>(channel + 1);
  splitmix64(s);
  return s;
}

}  // namespace

double OnlineConfig::tau_for(int player) const {
  if (tau.empty()) return 50.0;
  if (tau.size() == 1) return tau[0];
  return tau[static_cast<std::size_t>(player)];
}

double OnlineConfig::kappa_for(int player) const {
  if (kappa.empty()) return 5.0;
  if (kappa.size() == 1) return kappa[0];
  return kappa[static_cast<std::size_t>(player)];
}

std::vector<double> excitation_frequencies(const ExcitationConfig& cfg,
                                           std::uint64_t seed, int channel,
                                           int reset_index) {
  std::uint64_t s = stream_seed(seed, channel, reset_index);
  std::vector<double> freqs(static_cast<std::size_t>(cfg.sines_per_channel));
  for (double& f : freqs)
    f = cfg.freq_min_hz + (cfg.freq_max_hz - cfg.freq_min_hz) * uniform01(s);
  return freqs;
}

double excitation_value(const ExcitationConfig& cfg, std::uint64_t seed, double t,
                        int channel, int reset_index) {
  double out = 0.0;
  for (double f : excitation_frequencies(cfg, seed, channel, reset_index))
    out += cfg.amplitude * std::sin(2.0 * std::numbers::pi * f * t);
  return out;
}

Eigen::VectorXd fne_adapt_step(const Eigen::VectorXd& theta_bar,
                               const Eigen::MatrixXd& m_u, const Eigen::VectorXd& z_u,
                               double h, double tau) {
  Eigen::VectorXd update =
      -tau * (m_u.transpose() * (m_u * theta_bar)) + tau * (m_u.transpose() * z_u);
  return theta_bar + h * update;
}

Eigen::VectorXd hjb_adapt_step(const Eigen::VectorXd& eta, const Eigen::VectorXd& m,
                               double z, double h, double kappa) {
  return eta + h * (-kappa * m * (m.dot(eta)) + kappa * m * z);
}

StoppingBuffer::StoppingBuffer(double window_T, double h) : h_(h) {
  if (!(window_T > 0) || !(h > 0))
    throw std::invalid_argument("stopping buffer: window and step must be positive");
  half_count_ = static_cast<std::size_t>(std::llround(window_T / h));
  if (half_count_ < 1) half_count_ = 1;
}

void StoppingBuffer::push(const Eigen::VectorXd& value) {
  samples_.push_back(value);
  // 2N + 1 samples span exactly [t - 2T, t].
  while (samples_.size() > 2 * half_count_ + 1) samples_.pop_front();
}

bool StoppingBuffer::full() const { return samples_.size() == 2 * half_count_ + 1; }

double StoppingBuffer::metric() const {
  if (!full()) throw std::logic_error("stopping metric: insufficient history");
  const std::size_t n = half_count_;
  Eigen::VectorXd older = Eigen::VectorXd::Zero(samples_.front().size());
  Eigen::VectorXd newer = older;
  // Trapezoid over [t-2T, t-T] (samples 0..n) and [t-T, t] (samples n..2n).
  for (std::size_t k = 0; k <= n; k++) {
    double w = (k == 0 || k == n) ? 0.5 : 1.0;
    older += w * samples_[k];
  }
  for (std::size_t k = n; k <= 2 * n; k++) {
    double w = (k == n || k == 2 * n) ? 0.5 : 1.0;
    newer += w * samples_[k];
  }
  double window = static_cast<double>(n) * h_;
  return (newer - older).norm() * h_ / window;
}

PeDiagnostic pe_diagnostic(const std::vector<Eigen::MatrixXd>& regressor_window,
                           double h, double rel_tol) {
  PeDiagnostic diag;
  if (regressor_window.empty()) return diag;
  const Eigen::Index dim = regressor_window.front().rows();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(dim, dim);
  const std::size_t last = regressor_window.size() - 1;
  for (std::size_t k = 0; k < regressor_window.size(); k++) {
    double w = (k == 0 || k == last) ? 0.5 : 1.0;
    const Eigen::MatrixXd& s = regressor_window[k];
    gram += w * (s * s.transpose());
  }
  gram *= h;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  diag.eigenvalues = es.eigenvalues();
  diag.lambda_min = diag.eigenvalues.size() > 0 ? diag.eigenvalues[0] : 0.0;
  double lmax = diag.eigenvalues.size() > 0
                    ? diag.eigenvalues[diag.eigenvalues.size() - 1]
                    : 0.0;
  if (lmax > 0)
    for (Eigen::Index i = 0; i < diag.eigenvalues.size(); i++)
      if (diag.eigenvalues[i] > rel_tol * lmax) diag.excited_dim++;
  return diag;
}

OnlineRunResult run_online_adaptation(
    const GameModel& model, const std::vector<ExprVec>& gt_strategies,
    const std::vector<Eigen::VectorXd>& inits, double segment_T,
    const std::vector<BasisSplit>& splits, const OnlineConfig& cfg,
    const std::vector<std::optional<Expr>>& cost_offsets,
    const std::vector<Eigen::VectorXd>* theta_bar_init) {
  const Dynamics& dyn = model.dynamics;
  const int n = dyn.state_dim;
  const int p = dyn.total_control_dim();
  const int num_players = model.num_players();

  // The ground-truth plant: closed loop with resets, streamed tick by tick.
  int horizon_segments = static_cast<int>(std::ceil(cfg.horizon / segment_T - 1e-9));
  std::vector<Eigen::VectorXd> run_inits;
  for (int d = 0; d < horizon_segments; d++)
    run_inits.push_back(inits[static_cast<std::size_t>(d) % inits.size()]);
  Trajectory gt = integrate_closed_loop(dyn, gt_strategies, run_inits, segment_T, cfg.h);

  struct PlayerWork {
    ExprMat phi_bar;     // p_i x p_i*h_bar
    ExprMat jac_r;       // reduced value-basis jacobian
    ExprMat jac_mr;      // vanishing value-basis jacobian
    int h_bar = 0;
    int eta_dim = 0;
    bool alpha_negative = false;
    StoppingBuffer fne_buffer, hjb_buffer;
    std::vector<Eigen::MatrixXd> pe_fne, pe_hjb;
    PlayerWork(double T, double h) : fne_buffer(T, h), hjb_buffer(T, h) {}
  };

  std::vector<PlayerWork> work;
  OnlineRunResult result;
  result.players.resize(static_cast<std::size_t>(num_players));
  const std::size_t pe_window = static_cast<std::size_t>(std::llround(cfg.window_T / cfg.h)) + 1;

  for (int i = 0; i < num_players; i++) {
    const PlayerModel& pm = model.players[static_cast<std::size_t>(i)];
    const BasisSplit& split = splits[static_cast<std::size_t>(i)];
    PlayerWork w(cfg.window_T, cfg.h);
    ExprMat phi_r_mat = reduced_strategy_basis(pm.value_basis, split, dyn.g[static_cast<std::size_t>(i)]);
    w.phi_bar = stack_strategy_blocks(phi_r_mat);
    ExprVec phi_r(split.h_bar()), phi_mr(static_cast<int>(split.vanishing.size()));
    for (int c = 0; c < split.h_bar(); c++)
      phi_r[c] = pm.value_basis[split.reduced[static_cast<std::size_t>(c)]];
    for (std::size_t c = 0; c < split.vanishing.size(); c++)
      phi_mr[static_cast<int>(c)] = pm.value_basis[split.vanishing[c]];
    w.jac_r = jacobian(phi_r, n);
    w.jac_mr = jacobian(phi_mr, n);
    w.h_bar = split.h_bar();
    w.eta_dim = p + pm.cost_dim() + (pm.value_dim() - split.h_bar());
    work.push_back(std::move(w));

    OnlinePlayerResult& pr = result.players[static_cast<std::size_t>(i)];
    int theta_dim = dyn.control_dim(i) * split.h_bar();
    pr.theta_bar = theta_bar_init
                       ? (*theta_bar_init)[static_cast<std::size_t>(i)]
                       : Eigen::VectorXd::Zero(theta_dim);
    pr.eta = Eigen::VectorXd::Zero(work.back().eta_dim);
    pr.eta_min = pr.eta;
    pr.eta_max = pr.eta;
  }

  const int steps = gt.steps();

  auto theta_r_of = [&](int i, const Eigen::VectorXd& theta_bar) -> Eigen::VectorXd {
    const int p_i = dyn.control_dim(i);
    const int h_bar = work[static_cast<std::size_t>(i)].h_bar;
    Eigen::VectorXd avg = Eigen::VectorXd::Zero(h_bar);
    for (int j = 0; j < p_i; j++) {
      Eigen::VectorXd block = theta_bar.segment(j * h_bar, h_bar);
      double norm = block.norm();
      if (norm > 1e-12) avg += block / norm;
    }
    return avg / static_cast<double>(p_i);
  };

  for (int k = 0; k < steps; k++) {
    const double t = gt.time_at(k);
    const int reset_index = gt.segment[static_cast<std::size_t>(k)];
    Eigen::VectorXd x_star = gt.states.row(k).transpose();
    Eigen::VectorXd u_star = gt.controls.row(k).transpose();

    // Strategy adaptation on the true closed-loop data.
    for (int i = 0; i < num_players; i++) {
      OnlinePlayerResult& pr = result.players[static_cast<std::size_t>(i)];
      PlayerWork& w = work[static_cast<std::size_t>(i)];
      Eigen::MatrixXd m_u = -0.5 * w.phi_bar.eval(x_star);
      Eigen::VectorXd z_u = u_star.segment(dyn.control_offset(i), dyn.control_dim(i));
      if (!pr.fne_frozen && !pr.nonfinite) {
        pr.theta_bar = fne_adapt_step(pr.theta_bar, m_u, z_u, cfg.h, cfg.tau_for(i));
        if (!pr.theta_bar.allFinite()) {
          pr.nonfinite = true;
          pr.nonfinite_time = t;
        }
      }
      w.pe_fne.push_back(m_u.transpose());
      if (w.pe_fne.size() > pe_window) w.pe_fne.erase(w.pe_fne.begin());
    }

    // Cost adaptation at the excitation state, with the current estimates.
    Eigen::VectorXd x_hjb(n);
    for (int c = 0; c < n; c++)
      x_hjb[c] = excitation_value(cfg.excitation, cfg.seed, t, c, reset_index);

    Eigen::VectorXd mu_hat(p);
    for (int j = 0; j < num_players; j++) {
      const OnlinePlayerResult& pj = result.players[static_cast<std::size_t>(j)];
      Eigen::MatrixXd phi_bar_x = work[static_cast<std::size_t>(j)].phi_bar.eval(x_hjb);
      mu_hat.segment(dyn.control_offset(j), dyn.control_dim(j)) =
          -0.5 * phi_bar_x * pj.theta_bar;
    }
    Eigen::VectorXd f_g = dyn.f.eval(x_hjb);
    for (int j = 0; j < num_players; j++)
      f_g += dyn.g[static_cast<std::size_t>(j)].eval(x_hjb) *
             mu_hat.segment(dyn.control_offset(j), dyn.control_dim(j));

    for (int i = 0; i < num_players; i++) {
      OnlinePlayerResult& pr = result.players[static_cast<std::size_t>(i)];
      PlayerWork& w = work[static_cast<std::size_t>(i)];
      const PlayerModel& pm = model.players[static_cast<std::size_t>(i)];

      Eigen::VectorXd m(w.eta_dim);
      m.segment(0, p) = mu_hat.cwiseAbs2();
      m.segment(p, pm.cost_dim()) = pm.cost_basis.eval(x_hjb);
      const int mr_dim = pm.value_dim() - w.h_bar;
      if (mr_dim > 0)
        m.segment(p + pm.cost_dim(), mr_dim) = w.jac_mr.eval(x_hjb) * f_g;
      Eigen::VectorXd theta_r = theta_r_of(i, pr.theta_bar);
      double z = -theta_r.dot(w.jac_r.eval(x_hjb) * f_g);
      const std::optional<Expr>& offset = cost_offsets[static_cast<std::size_t>(i)];
      if (offset) z -= offset->eval(x_hjb);

      if (!pr.hjb_frozen && !pr.nonfinite) {
        pr.eta = hjb_adapt_step(pr.eta, m, z, cfg.h, cfg.kappa_for(i));
        if (!pr.eta.allFinite()) {
          pr.nonfinite = true;
          pr.nonfinite_time = t;
        }
      }
      w.pe_hjb.push_back(m);
      if (w.pe_hjb.size() > pe_window) w.pe_hjb.erase(w.pe_hjb.begin());

      if (pr.eta.allFinite()) {
        pr.eta_min = pr.eta_min.cwiseMin(pr.eta);
        pr.eta_max = pr.eta_max.cwiseMax(pr.eta);
        Eigen::VectorXd self = pr.eta.segment(dyn.control_offset(i), dyn.control_dim(i));
        bool negative_now = (self.array() < 0.0).any();
        if (negative_now && !w.alpha_negative)
          pr.negative_alpha_times.push_back(t);  // start of a negative episode
        w.alpha_negative = negative_now;
      }

      // Stopping metrics and freezes.
      w.fne_buffer.push(pr.theta_bar);
      w.hjb_buffer.push(pr.eta);
      double metric_fne = -1.0, metric_hjb = -1.0;
      if (w.fne_buffer.full()) {
        metric_fne = w.fne_buffer.metric();
        if (!pr.fne_frozen && metric_fne < cfg.stop_threshold) {
          pr.fne_frozen = true;
          pr.fne_freeze_time = t;
        }
      }
      if (w.hjb_buffer.full()) {
        metric_hjb = w.hjb_buffer.metric();
        if (!pr.hjb_frozen && metric_hjb < cfg.stop_threshold) {
          pr.hjb_frozen = true;
          pr.hjb_freeze_time = t;
        }
      }
      pr.last_metric_fne = metric_fne;
      pr.last_metric_hjb = metric_hjb;

      if (k % cfg.trace_decimation == 0 || k == steps - 1) {
        pr.trace.t.push_back(t);
        pr.trace.theta_bar.push_back(pr.theta_bar);
        pr.trace.eta.push_back(pr.eta);
        pr.trace.stop_metric_fne.push_back(metric_fne);
        pr.trace.stop_metric_hjb.push_back(metric_hjb);
        pr.trace.frozen_fne.push_back(pr.fne_frozen ? 1 : 0);
        pr.trace.frozen_hjb.push_back(pr.hjb_frozen ? 1 : 0);
      }
    }
  }

  result.all_frozen = true;
  for (int i = 0; i < num_players; i++) {
    OnlinePlayerResult& pr = result.players[static_cast<std::size_t>(i)];
    PlayerWork& w = work[static_cast<std::size_t>(i)];
    pr.pe_fne = pe_diagnostic(w.pe_fne, cfg.h);
    pr.pe_hjb = pe_diagnostic(w.pe_hjb, cfg.h);
    pr.alpha = pr.eta.head(p);
    pr.beta = pr.eta.segment(p, model.players[static_cast<std::size_t>(i)].cost_dim());
    pr.theta_r = theta_r_of(i, pr.theta_bar);
    if (!pr.fne_frozen || !pr.hjb_frozen) result.all_frozen = false;
  }
  return result;
}

}  // namespace idg
