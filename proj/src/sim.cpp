#include "idg/sim.hpp"

#include "idg/io_util.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace idg {

namespace {

Eigen::VectorXd drift(const Dynamics& dyn, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& u) {
  Eigen::VectorXd dx = dyn.f.eval(x);
  int off = 0;
  for (int j = 0; j < dyn.num_players(); j++) {
    const ExprMat& gj = dyn.g[static_cast<std::size_t>(j)];
    dx += gj.eval(x) * u.segment(off, gj.cols());
    off += gj.cols();
  }
  return dx;
}

Eigen::VectorXd rk4_step(const Dynamics& dyn, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u, double h) {
  Eigen::VectorXd k1 = drift(dyn, x, u);
  Eigen::VectorXd k2 = drift(dyn, x + 0.5 * h * k1, u);
  Eigen::VectorXd k3 = drift(dyn, x + 0.5 * h * k2, u);
  Eigen::VectorXd k4 = drift(dyn, x + h * k3, u);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Eigen::VectorXd stacked_control(const std::vector<ExprVec>& strategies,
                                const Eigen::VectorXd& x, int p) {
  Eigen::VectorXd u(p);
  int off = 0;
  for (const ExprVec& mu : strategies) {
    u.segment(off, mu.size()) = mu.eval(x);
    off += mu.size();
  }
  return u;
}

int steps_per_segment(double segment_T, double h) {
  double ratio = segment_T / h;
  int steps = static_cast<int>(std::llround(ratio));
  if (steps < 1 || std::abs(ratio - steps) > 1e-6 * std::max(1.0, ratio))
    throw std::invalid_argument("segment length must be a multiple of the step");
  return steps;
}

}  // namespace

int Trajectory::num_segments() const {
  return segment.empty() ? 0 : segment.back() + 1;
}

Trajectory integrate_closed_loop(const Dynamics& dyn,
                                 const std::vector<ExprVec>& strategies,
                                 const std::vector<Eigen::VectorXd>& inits,
                                 double segment_T, double h) {
  if (h <= 0) throw std::invalid_argument("step h must be positive");
  if (inits.empty()) throw std::invalid_argument("at least one initial state required");
  const int steps = steps_per_segment(segment_T, h);
  const int p = dyn.total_control_dim();
  const int total = steps * static_cast<int>(inits.size());

  Trajectory traj;
  traj.h = h;
  traj.state_dim = dyn.state_dim;
  traj.control_dim = p;
  traj.states.resize(total, dyn.state_dim);
  traj.controls.resize(total, p);
  traj.segment.resize(static_cast<std::size_t>(total));

  int row = 0;
  for (std::size_t d = 0; d < inits.size(); d++) {
    Eigen::VectorXd x = inits[d];
    if (x.size() != dyn.state_dim)
      throw std::invalid_argument("initial state dimension mismatch");
    for (int k = 0; k < steps; k++, row++) {
      Eigen::VectorXd u = stacked_control(strategies, x, p);
      traj.states.row(row) = x.transpose();
      traj.controls.row(row) = u.transpose();
      traj.segment[static_cast<std::size_t>(row)] = static_cast<int>(d);
      x = rk4_step(dyn, x, u, h);
      if (!x.allFinite()) {
        traj.diverged = true;
        traj.divergence_time = traj.time_at(row + 1);
        traj.states.conservativeResize(row + 1, Eigen::NoChange);
        traj.controls.conservativeResize(row + 1, Eigen::NoChange);
        traj.segment.resize(static_cast<std::size_t>(row + 1));
        return traj;
      }
    }
  }
  return traj;
}

Trajectory replay_open_loop(const Dynamics& dyn, const Trajectory& recorded,
                            const std::vector<Eigen::VectorXd>& inits,
                            double segment_T) {
  const int steps = steps_per_segment(segment_T, recorded.h);
  Trajectory traj = recorded;
  int row = 0;
  for (std::size_t d = 0; d < inits.size(); d++) {
    Eigen::VectorXd x = inits[d];
    for (int k = 0; k < steps && row < recorded.steps(); k++, row++) {
      traj.states.row(row) = x.transpose();
      Eigen::VectorXd u = recorded.controls.row(row).transpose();
      x = rk4_step(dyn, x, u, recorded.h);
    }
  }
  return traj;
}

int Demonstrations::total_samples() const {
  int total = 0;
  for (const Segment& s : segments) total += static_cast<int>(s.states.rows());
  return total;
}

Demonstrations sample(const Trajectory& traj, double dt) {
  double ratio = dt / traj.h;
  int stride = static_cast<int>(std::llround(ratio));
  if (stride < 1 || std::abs(ratio - stride) > 1e-6 * std::max(1.0, ratio))
    throw std::invalid_argument("dt must be an integer multiple of the step");

  Demonstrations demos;
  demos.dt = dt;
  int row = 0;
  while (row < traj.steps()) {
    int seg = traj.segment[static_cast<std::size_t>(row)];
    int seg_end = row;
    while (seg_end < traj.steps() && traj.segment[static_cast<std::size_t>(seg_end)] == seg)
      seg_end++;
    int seg_len = seg_end - row;
    int count = (seg_len + stride - 1) / stride;
    Demonstrations::Segment s;
    s.states.resize(count, traj.state_dim);
    s.controls.resize(count, traj.control_dim);
    for (int k = 0; k < count; k++) {
      s.states.row(k) = traj.states.row(row + k * stride);
      s.controls.row(k) = traj.controls.row(row + k * stride);
    }
    demos.segments.push_back(std::move(s));
    row = seg_end;
  }
  return demos;
}

Nsae nsae(const Trajectory& ref, const Trajectory& est) {
  if (ref.steps() != est.steps() || ref.h != est.h)
    throw std::invalid_argument("nsae: time grids differ");
  if (ref.state_dim != est.state_dim || ref.control_dim != est.control_dim)
    throw std::invalid_argument("nsae: dimensions differ");

  Nsae out;
  for (int j = 0; j < ref.state_dim; j++) {
    double peak = ref.states.col(j).cwiseAbs().maxCoeff();
    if (peak == 0.0) {
      peak = 1.0;
      out.zero_reference_channel = true;
    }
    out.state_error += (est.states.col(j) - ref.states.col(j)).cwiseAbs().sum() / peak;
  }
  for (int j = 0; j < ref.control_dim; j++) {
    double peak = ref.controls.col(j).cwiseAbs().maxCoeff();
    if (peak == 0.0) {
      peak = 1.0;
      out.zero_reference_channel = true;
    }
    out.control_error += (est.controls.col(j) - ref.controls.col(j)).cwiseAbs().sum() / peak;
  }
  return out;
}

void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path) {
  std::ostringstream os;
  os << "t";
  for (int j = 0; j < traj.state_dim; j++) os << ",x" << (j + 1);
  for (int j = 0; j < traj.control_dim; j++) os << ",u" << (j + 1);
  os << ",segment\n";
  char buf[40];
  for (int k = 0; k < traj.steps(); k++) {
    std::snprintf(buf, sizeof(buf), "%.17g", traj.time_at(k));
    os << buf;
    for (int j = 0; j < traj.state_dim; j++) {
      std::snprintf(buf, sizeof(buf), "%.17g", traj.states(k, j));
      os << ',' << buf;
    }
    for (int j = 0; j < traj.control_dim; j++) {
      std::snprintf(buf, sizeof(buf), "%.17g", traj.controls(k, j));
      os << ',' << buf;
    }
    os << ',' << traj.segment[static_cast<std::size_t>(k)] << '\n';
  }
  write_file_atomic(path, os.str());
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  int n = 0, p = 0;
  {
    std::stringstream hs(header);
    std::string col;
    while (std::getline(hs, col, ',')) {
      if (col.size() > 1 && col[0] == 'x') n++;
      if (col.size() > 1 && col[0] == 'u') p++;
    }
  }
  std::vector<double> times;
  std::vector<Eigen::VectorXd> xs, us;
  std::vector<int> segs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(std::stod(cell));
    if (static_cast<int>(cells.size()) != 1 + n + p + 1)
      throw std::runtime_error("malformed trajectory row in " + path.string());
    times.push_back(cells[0]);
    xs.push_back(Eigen::Map<Eigen::VectorXd>(cells.data() + 1, n));
    us.push_back(Eigen::Map<Eigen::VectorXd>(cells.data() + 1 + n, p));
    segs.push_back(static_cast<int>(cells.back()));
  }
  Trajectory traj;
  traj.state_dim = n;
  traj.control_dim = p;
  traj.t0 = times.empty() ? 0.0 : times.front();
  traj.h = times.size() > 1 ? times[1] - times[0] : 0.0;
  traj.states.resize(static_cast<Eigen::Index>(xs.size()), n);
  traj.controls.resize(static_cast<Eigen::Index>(us.size()), p);
  for (std::size_t k = 0; k < xs.size(); k++) {
    traj.states.row(static_cast<Eigen::Index>(k)) = xs[k].transpose();
    traj.controls.row(static_cast<Eigen::Index>(k)) = us[k].transpose();
  }
  traj.segment = std::move(segs);
  return traj;
}

}  // namespace idg
