#pragma once

#include "idg/game.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <vector>

namespace idg {

/// Uniformly sampled closed-loop run. Controls are the feedback values at
/// the stored states, held constant over each integration step, so replaying
/// the recorded control sequence open-loop reproduces the states exactly.
struct Trajectory {
  double t0 = 0.0;
  double h = 0.0;
  int state_dim = 0;
  int control_dim = 0;
  Eigen::MatrixXd states;    // steps x n, state at the beginning of each step
  Eigen::MatrixXd controls;  // steps x p
  std::vector<int> segment;  // segment index per row
  bool diverged = false;
  double divergence_time = 0.0;

  int steps() const { return static_cast<int>(states.rows()); }
  double time_at(int k) const { return t0 + h * k; }
  int num_segments() const;
};

/// Integrates xdot = f(x) + sum_j G_j(x) mu_j(x) with classical RK4 and the
/// control held at mu(x_k) across each step. The state is reset to the next
/// initial condition every segment_T seconds. On a non-finite state the run
/// stops and the divergence time is recorded.
Trajectory integrate_closed_loop(const Dynamics& dyn,
                                 const std::vector<ExprVec>& strategies,
                                 const std::vector<Eigen::VectorXd>& inits,
                                 double segment_T, double h);

/// Open-loop replay of a recorded control sequence from the same initial
/// states; used to cross-check the recording convention.
Trajectory replay_open_loop(const Dynamics& dyn, const Trajectory& recorded,
                            const std::vector<Eigen::VectorXd>& inits,
                            double segment_T);

struct Demonstrations {
  double dt = 0.0;  // sample spacing
  struct Segment {
    Eigen::MatrixXd states;    // K x n
    Eigen::MatrixXd controls;  // K x p
  };
  std::vector<Segment> segments;

  int samples_per_segment() const {
    return segments.empty() ? 0 : static_cast<int>(segments.front().states.rows());
  }
  int total_samples() const;
};

/// Takes pairs (x, u) every dt seconds from each segment; dt must be an
/// integer multiple of the trajectory step.
Demonstrations sample(const Trajectory& traj, double dt);

struct Nsae {
  double state_error = 0.0;    // delta_x
  double control_error = 0.0;  // delta_u
  bool zero_reference_channel = false;
};

/// Normalized sum of absolute errors between two trajectories on identical
/// time grids. An all-zero reference channel is normalized by 1 and flagged.
Nsae nsae(const Trajectory& ref, const Trajectory& est);

/// CSV with header t,x1..xn,u1..up,segment at full double precision.
void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path);
Trajectory read_trajectory_csv(const std::filesystem::path& path);

}  // namespace idg
