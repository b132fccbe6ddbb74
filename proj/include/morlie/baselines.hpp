#pragma once

#include "morlie/fitting.hpp"
#include "morlie/rom_sim.hpp"

#include <vector>

namespace morlie {

enum class CloudDistanceMode { mean, max };

/// Mean or max per-particle Euclidean distance between two clouds of equal
/// particle count.
double cloud_distance(const StatePoint& P, const StatePoint& Q,
                      CloudDistanceMode mode = CloudDistanceMode::mean);

enum class ErrorMode { full, step_ahead };

struct ErrorCurve {
  std::vector<double> times;
  std::vector<double> errors;
};

/// full: one reconstruction from the model's x0, compared against the data at
/// every time. step_ahead: re-seed the model at each data state and compare
/// after one step.
ErrorCurve trajectory_errors(const Trajectory& fom, const RomModel& rom, ErrorMode mode,
                             Integrator method = Integrator::rkmk4);

struct PodResult {
  Vector singular_values;  // descending
  Matrix modes;            // columns
  Vector mean;             // zero when not centered
  bool centered = false;

  /// Minimal mode count whose singular-value sum reaches the fraction a.
  int modes_for_energy(double a) const;
};

/// SVD of the snapshot matrix (states as columns across all trajectories and
/// times). include_time_row appends the snapshot time as an extra row.
PodResult pod_svd(const SnapshotSet& S, bool center = false, bool include_time_row = false);

struct PodError {
  double worst = 0.0;
  double mean = 0.0;
};

/// Projection error of every snapshot onto the leading n_modes POD modes
/// (chart distance; sup and mean over snapshots).
PodError pod_reconstruct_error(const SnapshotSet& S, int n_modes, bool center = false);

struct WidthResult {
  double width = 0.0;
  int flagged = 0;  // snapshots whose inner minimization did not converge
};

/// Empirical group width for a fixed (G, Phi): sup over the selected snapshots
/// of the best orbit-point distance inf_g dist(x, Phi(g, anchor)), solved per
/// snapshot by Levenberg-Marquardt with multi-starts (identity, relative
/// affine transform, previous solution). An upper bound on the true width.
/// horizon < 0 selects every snapshot regardless of time.
WidthResult estimate_group_width(const SnapshotSet& S, const ActionSpec& spec,
                                 const StatePoint& anchor, double start_time = 0.0,
                                 double horizon = -1.0, const LmConfig& cfg = {});

/// Width over initial conditions: per trajectory anchor at its first snapshot,
/// sup over trajectories.
WidthResult width_over_initial_conditions(const SnapshotSet& S, const ActionSpec& spec,
                                          const LmConfig& cfg = {});

}  // namespace morlie
