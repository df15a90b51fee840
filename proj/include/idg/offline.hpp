#pragma once

#include "idg/game.hpp"
#include "idg/sim.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace idg {

/// Partition of a value basis into elements whose gradients are visible
/// through G_i (reduced, identifiable from controls) and those annihilated
/// by G_i^T (vanishing).
struct BasisSplit {
  std::vector<int> reduced;            // indices into phi, original order
  std::vector<int> vanishing;
  std::vector<double> probe_evidence;  // max ||G^T grad phi_j|| per element j

  int h_bar() const { return static_cast<int>(reduced.size()); }
};

/// Element j is reduced iff max over probes of ||G_i(x)^T grad phi_j(x)||
/// exceeds tol.
BasisSplit split_basis(const ExprVec& phi, const ExprMat& g_i,
                       const std::vector<Eigen::VectorXd>& probes, double tol = 1e-9);

/// G_i^T (dphi_r/dx)^T, shape p_i x h_bar.
ExprMat reduced_strategy_basis(const ExprVec& phi, const BasisSplit& split,
                               const ExprMat& g_i);

/// Block-diagonal arrangement: row k carries the k-th row of the reduced
/// strategy basis in columns [k*h_bar, (k+1)*h_bar); shape p_i x p_i*h_bar.
ExprMat stack_strategy_blocks(const ExprMat& phi_r);

struct FneData {
  Eigen::MatrixXd m;  // D*K*p_i x p_i*h_bar, rows -1/2 Phi_bar(x_k)
  Eigen::VectorXd z;  // stacked control samples of player i
};

FneData assemble_fne_data(const Demonstrations& demos, const ExprMat& phi_bar,
                          int player_control_offset, int player_control_dim);

struct FneIdentResult {
  Eigen::VectorXd theta_bar;                // minimum-norm regression weights
  int rank = 0;
  bool full_rank = false;                   // rank == p_i * h_bar
  double residual = 0.0;                    // ||M theta_bar - z||
  ExprVec strategy;                         // reconstructed mu_hat_i
  std::optional<Eigen::VectorXd> theta_r;   // block-averaged unit direction
};

/// Minimum-norm solve of the strategy regression plus, on full rank, the
/// normalized block average of the weights. Throws on a degenerate
/// (zero-norm or sign-flipped) block.
FneIdentResult identify_fne(const FneData& data, const ExprMat& phi_bar,
                            double rtol = 1e-8);

enum class HjbMode { Reduced, Full };

struct HjbData {
  Eigen::MatrixXd m;
  Eigen::VectorXd z;
  HjbMode mode = HjbMode::Reduced;
  int alpha_dim = 0;  // p
  int beta_dim = 0;   // m_i
};

/// Builds the per-player HJB regression over the grid. Reduced mode needs
/// theta_r and regresses only the vanishing value-basis block; full mode
/// regresses the whole value basis against a zero target. A cost offset
/// expression, when present, is subtracted from the target.
HjbData assemble_hjb_data(const Dynamics& dyn, const ExprVec& psi_i,
                          const ExprVec& phi_i, const BasisSplit& split,
                          const std::vector<ExprVec>& strategies,
                          const std::optional<Eigen::VectorXd>& theta_r,
                          const std::vector<Eigen::VectorXd>& grid, HjbMode mode,
                          const std::optional<Expr>& cost_offset = std::nullopt);

/// Affine family of parameter vectors consistent with the HJB data:
/// particular + span(null_basis), with the projector onto (alpha, beta)
/// given by the leading l_rows coordinates.
struct SolutionSet {
  HjbMode mode = HjbMode::Reduced;
  Eigen::VectorXd particular;
  Eigen::MatrixXd null_basis;   // orthonormal columns
  int l_rows = 0;               // p + m_i
  int rank = 0;
  bool unique_after_projection = false;
  double residual = 0.0;        // ||M particular - z||
  double z_norm = 0.0;

  int null_dim() const { return static_cast<int>(null_basis.cols()); }
  Eigen::VectorXd element(const Eigen::VectorXd& w) const;
};

SolutionSet solve_solution_set(const HjbData& data, double rtol = 1e-8);

/// Distance from a candidate parameter vector to the affine solution set.
double membership_residual(const SolutionSet& set, const Eigen::VectorXd& eta);
/// Same for an (alpha, beta)-only candidate, measured on the projected set.
double membership_residual_alpha_beta(const SolutionSet& set,
                                      const Eigen::VectorXd& alpha_beta);

struct WSelection {
  std::optional<Eigen::VectorXd> fixed;  // explicit w; otherwise search
  double lo = -10.0, hi = 10.0;
  int samples = 2001;
};

struct SelectedParameters {
  Eigen::VectorXd eta;
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  Eigen::VectorXd w_used;
  bool valid = false;
  bool scale_resolved = true;  // false for the homogeneous full-rank-deficient branch
  std::string rejection;       // first violated filter when invalid
  std::optional<std::pair<double, double>> valid_interval;  // 1-dim search only
};

/// Extracts (alpha, beta) for one element of the set and applies the
/// validity filters: positive self weights, nonnegative cross weights and
/// grid positivity of the recovered state cost. In search mode scans the
/// configured w range and takes the first valid sample (w = 0 is always
/// tried first).
SelectedParameters select_parameters(const SolutionSet& set, const WSelection& wsel,
                                     const GameModel& model, int player,
                                     const std::vector<Eigen::VectorXd>& grid);

}  // namespace idg
