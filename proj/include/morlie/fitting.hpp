#pragma once

#include "morlie/group_actions.hpp"
#include "morlie/hermite.hpp"

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace morlie {

/// One measured state on one trajectory.
struct SnapshotRecord {
  int traj = 0;
  int step = 0;
  double time = 0.0;  // seconds
  StatePoint state;
  Vector param;  // mu
};

/// Solution-snapshot collection. Records are kept sorted by (traj, step);
/// times strictly increase within a trajectory and all states share one chart
/// and shape.
struct SnapshotSet {
  std::vector<SnapshotRecord> records;

  Chart chart() const;
  int n_trajectories() const;
  /// Contiguous record range of one trajectory.
  std::span<const SnapshotRecord> trajectory(int traj) const;
  std::vector<int> trajectory_ids() const;
  void sort_and_validate();
};

/// A state paired with a measured or finite-difference velocity.
struct VelocitySample {
  StatePoint state;
  Vector velocity;  // state units per second
  double time = 0.0;
  int traj = 0;
  int step = 0;
  Vector param;
};

/// Forward-difference velocity samples (x_{k+stride} - x_k) / dt, anchored at
/// the transition start per the approximate-velocity convention.
std::vector<VelocitySample> finite_difference_velocities(const SnapshotSet& S,
                                                         int transition_stride = 1);

/// Per-snapshot fitted algebra coefficients (one column per fitted
/// transition), expressed in `basis`.
struct ReducedSnapshotColumn {
  int traj = 0;
  int step = 0;     // transition start step
  int step_to = 0;  // transition end step (step+stride)
  double time = 0.0;
  Vector coeffs;
  double fit_cost = 0.0;  // final one-step cost (velocity-free fits)
  bool converged = true;
  bool rank_deficient = false;
};

struct ReducedSnapshotMatrix {
  AlgebraBasis basis;
  std::vector<ReducedSnapshotColumn> columns;
  std::vector<std::string> warnings;

  /// Columns stacked as a dim(g) x n_columns matrix.
  Matrix stacked() const;
};

/// Time-parameterized reduced vector field rho_theta: [t0,t1] -> g, stored as
/// a C1 piecewise-cubic Hermite interpolant per algebra channel.
struct ReducedVectorField {
  AlgebraBasis basis;
  HermiteSpline spline;
  double fit_rmse = 0.0;

  Vector eval(double t) const { return spline.eval(t); }
  AlgebraElement eval_element(double t) const { return basis.combine(spline.eval(t)); }
  double t_min() const { return spline.t_min(); }
  double t_max() const { return spline.t_max(); }
};

struct ProjectionResult {
  Vector rho;       // algebra coefficients in the action basis
  Vector residual;  // v - generator * rho, metric-orthogonal to the distribution
  bool rank_deficient = false;
};

/// Metric least-squares projection of a tangent vector onto the induced
/// distribution at x; rank-deficient generators resolve to the minimum-norm
/// coefficient vector.
ProjectionResult project_vector_field(const ActionSpec& spec, const StatePoint& x, const Vector& v);

/// Forward-difference velocities (x_{k+stride} - x_k)/dt projected per
/// snapshot. Trajectories with fewer than stride+1 snapshots are skipped with
/// a warning.
ReducedSnapshotMatrix fit_velocity_based(const ActionSpec& spec, const SnapshotSet& S,
                                         int transition_stride = 1);

struct LmConfig {
  int max_iters = 50;
  double grad_tol = 1e-10;
  double damping_init = 1e-3;
  double damping_up = 10.0;    // on reject
  double damping_down = 10.0;  // on accept
};

/// Per-transition minimization of dist(x_{k+stride}, Phi(exp(A dt), x_k)) over
/// A in the acting algebra, by Levenberg-Marquardt in algebra coordinates with
/// the retraction A -> exp((A+delta) dt). Warm-started along each trajectory;
/// non-convergence is flagged per column, never fatal.
ReducedSnapshotMatrix fit_velocity_free(const ActionSpec& spec, const SnapshotSet& S,
                                        const LmConfig& cfg = {}, int transition_stride = 1);

/// Average columns across trajectories at matching steps.
ReducedSnapshotMatrix average_across_trajectories(const ReducedSnapshotMatrix& Sg);

/// Fit rho_theta: average across trajectories, subsample by stride (keeping
/// the final sample), then least-squares fit a piecewise-cubic Hermite
/// interpolant per channel. t_end extends the domain past the last sample
/// (NaN: use the last sample time).
ReducedVectorField fit_rho_theta(const ReducedSnapshotMatrix& Sg, int n_segments = 100,
                                 int stride = 10, double t_end = std::nan(""));

/// Number of samples fit_rho_theta will use for the given averaged column
/// count and stride (every stride-th column plus the final one).
int rho_theta_sample_count(int n_columns, int stride);

enum class CostMode { velocity_based, velocity_free };

/// Summed fitting cost of a reduced vector field over all transitions of S.
double evaluate_cost(const ActionSpec& spec, const SnapshotSet& S, const ReducedVectorField& rho,
                     CostMode mode);

/// Summed one-step reconstruction cost of per-transition columns:
/// sum over columns of dist(x_{step_to}, Phi(exp(A dt), x_step)).
double one_step_cost(const ActionSpec& spec, const SnapshotSet& S,
                     const ReducedSnapshotMatrix& Sg);

/// Minimize dist(target, Phi(exp(basis(c)), source)) over algebra coefficients
/// c by Levenberg-Marquardt from the given start. Used by the group-width
/// estimator; shares the solver with fit_velocity_free.
struct GroupMatch {
  Vector coeffs;
  double distance = 0.0;  // chart distance at the solution
  bool converged = true;
};
GroupMatch match_state(const ActionSpec& spec, const StatePoint& source, const StatePoint& target,
                       const Vector& start, const LmConfig& cfg = {});

}  // namespace morlie
