#pragma once

#include "morlie/baselines.hpp"
#include "morlie/datagen.hpp"
#include "morlie/fitting.hpp"

#include <string>
#include <vector>

namespace morlie {

// --- file formats -----------------------------------------------------------
// Snapshot CSV (long format, UTF-8, LF, 17 significant digits):
//   #morlie-snapshots v1
//   traj,time,particle,x,y,z        (pointcloud3d)
//   traj,time,index,u               (grid1d)
//   traj,time,q1,q2                 (polar2d)
// Truth sidecar:
//   #morlie-truth v1
//   time,cluster,g00,...,g33        (row-major 4x4 per step and cluster)

void export_snapshots_csv(const SnapshotSet& S, const std::string& path);

/// Strict ingest: schema violations and non-finite values raise errors with
/// the offending line number.
SnapshotSet ingest_csv(const std::string& path);

struct TruthPaths {
  std::vector<double> times;
  std::vector<std::vector<GroupElement>> paths;  // [cluster][step], 4x4 each
};
void export_truth_csv(const TruthPaths& truth, const std::string& path);
TruthPaths ingest_truth_csv(const std::string& path);

void export_sg_csv(const ReducedSnapshotMatrix& Sg, const std::string& path);
ReducedSnapshotMatrix ingest_sg_csv(const std::string& path, const AlgebraBasis& basis);

void export_rho_csv(const ReducedVectorField& rho, const std::string& path);
ReducedVectorField ingest_rho_csv(const std::string& path, const AlgebraBasis& basis);

void export_assignment_csv(const std::vector<int>& assignment, const std::string& path);

/// Basis elements as row-major ambient matrices, one row per element.
void export_basis_csv(const AlgebraBasis& basis, const std::string& path);

void export_curve_csv(const ErrorCurve& curve, const std::string& path,
                      const std::string& value_name = "error");
void export_spectrum_csv(const Vector& singular_values, const std::string& path);

std::string format17(double v);

// --- plots ------------------------------------------------------------------

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

void write_line_svg(const std::string& path, const std::string& title, const std::string& xlabel,
                    const std::string& ylabel, const std::vector<PlotSeries>& series,
                    bool log_y = false);

/// Scatter overlay of a data cloud (circles) and its reconstruction (crosses),
/// x-y projection.
void write_scatter_overlay_svg(const std::string& path, const std::string& title,
                               const StatePoint& data, const StatePoint& recon);

// --- pipeline ----------------------------------------------------------------

struct RunConfig {
  BenchmarkConfig bench;
  std::string input_csv;  // ingest instead of generating when nonempty
  std::string output_dir = "out";
  std::string fit_mode = "both";  // velocity_based | velocity_free | both
  double energy_fraction = 0.99;
  double closure_tol = 1e-8;
  int cluster_neighbors = 8;
  double cluster_residual_tol = 0.15;
  int cluster_windows = 4;
  std::string integrator = "rkmk4";
  int rho_segments = 100;
  int rho_stride = 10;
  int ident_stride = 0;  // transition stride for subalgebra identification; 0 = n_steps/4
  bool compute_width = false;
  bool center_pod = false;
  bool pod_time_row = false;
  LmConfig lm;
};

struct PipelineResult {
  int exit_status = 0;  // 0 clean, 1 finished with flags, 2 stage failure
  std::string report_dir;
  std::vector<std::string> flags;
};

/// generate/ingest -> cluster -> fit -> subalgebra -> refit -> rho ->
/// simulate -> evaluate -> report. Stage wall times go to timings.txt so the
/// numeric report files are bit-identical across reruns.
PipelineResult run_pipeline(const RunConfig& cfg);

}  // namespace morlie
