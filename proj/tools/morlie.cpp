// Command-line front end: generate benchmarks, fit reduced vector fields,
// discover subalgebras, cluster multi-body motions, simulate ROMs and emit
// reports.

#include "morlie/baselines.hpp"
#include "morlie/clustering.hpp"
#include "morlie/datagen.hpp"
#include "morlie/io.hpp"
#include "morlie/rom_sim.hpp"
#include "morlie/subalgebra.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace {

using namespace morlie;

Family parse_family(const std::string& name) {
  if (name == "rigid") return Family::rigid;
  if (name == "sheering") return Family::sheering;
  if (name == "radial") return Family::radial;
  if (name == "transport") return Family::transport;
  throw CLI::ValidationError("--family", "unknown family '" + name + "'");
}

/// Standard action for a snapshot chart; cloud actions pick the basis from the
/// channel count (12 -> aff(3), 6 -> se(3)).
ActionSpec default_action(const SnapshotSet& S, int n_clusters,
                          const std::vector<int>& assignment, int channels) {
  switch (S.chart()) {
    case Chart::pointcloud3d:
      if (n_clusters > 1) return make_clustered_affine_action(assignment, n_clusters);
      if (channels == 6) return make_affine_cloud_action(se3_basis());
      return make_affine_cloud_action();
    case Chart::polar2d:
      return make_so2_polar_action();
    case Chart::grid1d:
      return make_grid_translation_action();
  }
  throw std::runtime_error("unsupported chart");
}

void add_bench_options(CLI::App* cmd, BenchmarkConfig& bench, std::string& family) {
  cmd->add_option("--family", family, "benchmark family: rigid|sheering|radial|transport");
  cmd->add_option("--n-traj", bench.n_traj, "number of trajectories");
  cmd->add_option("--n-particles", bench.n_particles, "particles per cloud (rigid)");
  cmd->add_option("--n-steps", bench.n_steps, "time steps per trajectory");
  cmd->add_option("--horizon", bench.horizon, "time horizon in seconds");
  cmd->add_option("--sigma", bench.sigma, "measurement noise std in meters");
  cmd->add_option("--seed", bench.seed, "master random seed");
  cmd->add_option("--n-clusters", bench.n_clusters, "clusters (sheering)");
  cmd->add_option("--particles-per-cluster", bench.particles_per_cluster,
                  "particles per cluster (sheering)");
  cmd->add_option("--cluster-spacing", bench.cluster_spacing, "cluster center spacing (m)");
  cmd->add_option("--amp-rotation", bench.amp_rotation, "twist rotation amplitude (rad/s)");
  cmd->add_option("--amp-translation", bench.amp_translation, "twist translation amplitude (m/s)");
  cmd->add_option("--amp-shear", bench.amp_shear, "generator shear amplitude (1/s)");
  cmd->add_option("--mu", bench.mu_values, "radial oscillator mu values");
  cmd->add_option("--q1-0", bench.q1_0, "radial initial q1");
  cmd->add_option("--q2-0", bench.q2_0, "radial initial q2");
  cmd->add_option("--radial-a", bench.radial_a, "radial oscillator constant a");
  cmd->add_option("--radial-b", bench.radial_b, "radial oscillator constant b");
  cmd->add_option("--grid-size", bench.grid_size, "transport grid size (power of two)");
  cmd->add_option("--mu1", bench.mu1_values, "transport speeds mu1");
  cmd->add_option("--mu2", bench.mu2_values, "transport wave numbers mu2 (integers)");
}

int cmd_generate(const BenchmarkConfig& bench, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  SnapshotSet S;
  if (bench.family == Family::rigid) {
    auto [s, t] = gen_rigid_cloud(bench);
    S = std::move(s);
    TruthPaths tp;
    for (const auto& r : S.trajectory(S.trajectory_ids().front())) tp.times.push_back(r.time);
    tp.paths.push_back(t.path);
    export_truth_csv(tp, out_dir + "/truth.csv");
  } else if (bench.family == Family::sheering) {
    auto [s, t] = gen_sheering_clouds(bench);
    S = std::move(s);
    TruthPaths tp;
    for (const auto& r : S.trajectory(S.trajectory_ids().front())) tp.times.push_back(r.time);
    tp.paths = t.paths;
    export_truth_csv(tp, out_dir + "/truth.csv");
    export_assignment_csv(t.assignment, out_dir + "/truth_assignment.csv");
  } else if (bench.family == Family::radial) {
    S = gen_radial_oscillator(bench);
  } else {
    S = gen_linear_transport(bench);
  }
  export_snapshots_csv(S, out_dir + "/snapshots.csv");
  std::cout << "wrote " << out_dir << "/snapshots.csv (" << S.records.size() << " snapshots)\n";
  return 0;
}

}  // namespace

namespace {

/// Expand `--config file` into tokens for keys the command line does not set
/// itself (flat key=value lines; the command line wins on conflicts).
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::string config_path;
  for (size_t i = 0; i + 1 < args.size(); ++i)
    if (args[i] == "--config") {
      config_path = args[i + 1];
      args.erase(args.begin() + i, args.begin() + i + 2);
      break;
    }
  if (config_path.empty()) return args;
  std::ifstream f(config_path);
  if (!f) throw std::runtime_error("cannot open config file: " + config_path);
  std::vector<std::string> extra;
  std::string line;
  while (std::getline(f, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string v) {
      const auto b = v.find_first_not_of(" \t\r");
      const auto e = v.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) continue;
    const std::string flag = "--" + key;
    if (std::find(args.begin(), args.end(), flag) != args.end()) continue;
    if (value == "true") {
      extra.push_back(flag);
      continue;
    }
    if (value == "false" || value.empty()) continue;
    extra.push_back(flag);
    std::stringstream ss(value);
    std::string tok;
    while (std::getline(ss, tok, ',')) extra.push_back(tok);
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"model order reduction on matrix Lie groups"};
  app.require_subcommand(1);

  BenchmarkConfig bench;
  std::string family = "rigid";
  RunConfig run;
  std::string input, out_dir = "out", out_file, mode = "velocity_free", recon_file, rho_file;
  int stride = 1, n_clusters = 1, n_modes = 0, channels = 12;
  double energy = 0.99, closure_tol = 1e-8, residual_tol = 0.15;
  int neighbors = 8, windows = 4;
  std::string integrator = "rkmk4", assignment_file;

  std::string config_doc;  // handled by expand_config before parsing
  auto* gen = app.add_subcommand("generate", "generate a synthetic benchmark");
  gen->add_option("--config", config_doc, "flat key=value configuration file; CLI flags override");
  add_bench_options(gen, bench, family);
  gen->add_option("--out", out_dir, "output directory");

  auto* fit = app.add_subcommand("fit", "fit a reduced snapshot matrix from snapshots");
  fit->add_option("--input", input, "snapshot CSV")->required();
  fit->add_option("--mode", mode, "velocity_based | velocity_free");
  fit->add_option("--stride", stride, "transition stride");
  fit->add_option("--channels", channels, "cloud basis channels: 12=aff(3), 6=se(3)");
  fit->add_option("--assignment", assignment_file, "cluster assignment CSV (clustered action)");
  fit->add_option("--out", out_file, "output Sg CSV")->required();

  auto* reduce = app.add_subcommand("reduce", "discover a minimal subalgebra from an Sg CSV");
  reduce->add_option("--input", input, "Sg CSV")->required();
  reduce->add_option("--clusters", n_clusters, "product-group copies the Sg was fit with");
  reduce->add_option("--energy", energy, "singular-value energy fraction");
  reduce->add_option("--closure-tol", closure_tol, "bracket closure tolerance");
  reduce->add_option("--out", out_file, "optional spectrum CSV");

  auto* cluster = app.add_subcommand("cluster", "split particles into motion-coherent clusters");
  cluster->add_option("--input", input, "snapshot CSV")->required();
  cluster->add_option("--neighbors", neighbors, "seed cluster size");
  cluster->add_option("--residual-tol", residual_tol, "relative residual tolerance");
  cluster->add_option("--windows", windows, "coarse time windows");
  cluster->add_option("--seed", bench.seed, "rng seed");
  cluster->add_option("--out", out_file, "assignment CSV")->required();

  auto* sim = app.add_subcommand("simulate", "integrate a ROM and write the reconstruction");
  sim->add_option("--input", input, "snapshot CSV (x0 and time grid)")->required();
  sim->add_option("--rho", rho_file, "reduced vector field CSV")->required();
  sim->add_option("--integrator", integrator, "lie_euler | rkmk4");
  sim->add_option("--assignment", assignment_file, "cluster assignment CSV (clustered action)");
  sim->add_option("--out", out_file, "reconstruction snapshot CSV")->required();

  auto* eval = app.add_subcommand("evaluate", "error curves between data and a reconstruction");
  eval->add_option("--input", input, "snapshot CSV (data)")->required();
  eval->add_option("--recon", recon_file, "snapshot CSV (reconstruction)")->required();
  eval->add_option("--pod-modes", n_modes, "also report POD projection error at this mode count");
  eval->add_option("--out", out_file, "error curve CSV")->required();

  auto* width = app.add_subcommand("width", "empirical group width over initial conditions");
  width->add_option("--input", input, "snapshot CSV")->required();
  width->add_option("--channels", channels, "cloud basis channels: 12=aff(3), 6=se(3)");
  width->add_option("--assignment", assignment_file, "cluster assignment CSV");

  auto* report = app.add_subcommand("report", "re-render SVG plots from a report directory");
  report->add_option("--dir", out_dir, "report directory")->required();

  auto* pipe = app.add_subcommand("pipeline", "run the full generate-to-report pipeline");
  pipe->add_option("--config", config_doc, "flat key=value configuration file; CLI flags override");
  add_bench_options(pipe, bench, family);
  pipe->add_option("--input", run.input_csv, "ingest this snapshot CSV instead of generating");
  pipe->add_option("--out", run.output_dir, "report directory");
  pipe->add_option("--fit-mode", run.fit_mode, "velocity_based | velocity_free | both");
  pipe->add_option("--energy", run.energy_fraction, "subalgebra energy fraction");
  pipe->add_option("--closure-tol", run.closure_tol, "bracket closure tolerance");
  pipe->add_option("--neighbors", run.cluster_neighbors, "clustering seed size");
  pipe->add_option("--residual-tol", run.cluster_residual_tol, "clustering residual tolerance");
  pipe->add_option("--windows", run.cluster_windows, "clustering coarse windows");
  pipe->add_option("--integrator", run.integrator, "lie_euler | rkmk4");
  pipe->add_option("--segments", run.rho_segments, "rho_theta Hermite segments");
  pipe->add_option("--stride", run.rho_stride, "rho_theta sample stride");
  pipe->add_option("--ident-stride", run.ident_stride,
                   "transition stride for subalgebra identification (0 = auto)");
  pipe->add_flag("--width", run.compute_width, "also estimate the group width");
  pipe->add_flag("--center-pod", run.center_pod, "mean-center snapshots before POD");
  pipe->add_flag("--pod-time-row", run.pod_time_row, "append the time row to the POD matrix");

  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  std::vector<char*> argv2;
  for (auto& a : args) argv2.push_back(a.data());
  CLI11_PARSE(app, static_cast<int>(argv2.size()), argv2.data());

  try {
    if (gen->parsed()) {
      bench.family = parse_family(family);
      return cmd_generate(bench, out_dir);
    }
    if (fit->parsed()) {
      SnapshotSet S = ingest_csv(input);
      std::vector<int> assignment;
      int nc = 1;
      if (!assignment_file.empty()) {
        SnapshotSet dummy;  // assignment csv: particle,cluster
        std::ifstream f(assignment_file);
        std::string line;
        std::getline(f, line);
        while (std::getline(f, line)) {
          const auto pos = line.find(',');
          if (pos == std::string::npos) continue;
          assignment.push_back(std::stoi(line.substr(pos + 1)));
        }
        nc = assignment.empty() ? 1 : 1 + *std::max_element(assignment.begin(), assignment.end());
      }
      ActionSpec spec = default_action(S, nc, assignment, channels);
      ReducedSnapshotMatrix Sg = mode == "velocity_based"
                                     ? fit_velocity_based(spec, S, stride)
                                     : fit_velocity_free(spec, S, LmConfig{}, stride);
      for (const auto& w : Sg.warnings) std::cerr << "warning: " << w << '\n';
      export_sg_csv(Sg, out_file);
      std::cout << "wrote " << out_file << " (" << Sg.columns.size() << " columns)\n";
      return 0;
    }
    if (reduce->parsed()) {
      // infer the fitting basis from the file's channel count
      int file_channels = 0;
      {
        std::ifstream f(input);
        std::string line;
        std::getline(f, line);
        std::getline(f, line);
        for (char ch : line) file_channels += (ch == ',');
        file_channels -= 5;  // traj,step,step_to,time,cost,converged
      }
      AlgebraBasis basis;
      if (file_channels == 1)
        basis = make_grid_translation_action().group_basis;
      else if (file_channels == 6)
        basis = se3_basis();
      else if (file_channels > 0 && file_channels % 12 == 0)
        basis = file_channels == 12 ? aff3_basis()
                                    : block_diagonal_basis(aff3_basis(), file_channels / 12);
      else
        throw std::runtime_error("reduce: unsupported channel count in " + input);
      ReducedSnapshotMatrix Sg = ingest_sg_csv(input, basis);
      SubalgebraSearchResult sub = subalgebra_search(Sg, energy, closure_tol);
      std::cout << "subalgebra dimension = " << sub.subalgebra.basis.size() << '\n'
                << "kept singular directions = " << sub.kept_singular << '\n'
                << "captured energy = " << format17(sub.captured_energy) << '\n'
                << "closure residual = " << format17(sub.subalgebra.closure_residual) << '\n'
                << "library match = " << (sub.library_match.empty() ? "-" : sub.library_match)
                << " (defect " << format17(sub.match_defect) << ")\n";
      if (!out_file.empty()) export_spectrum_csv(sub.singular_values, out_file);
      return sub.subalgebra.closed ? 0 : 1;
    }
    if (cluster->parsed()) {
      SnapshotSet S = ingest_csv(input);
      ClusterSearchResult cs = cluster_search(S, neighbors, residual_tol, bench.seed, windows);
      export_assignment_csv(cs.assignment, out_file);
      std::cout << "clusters = " << cs.n_clusters << " (reseeds " << cs.reseeds << ")\n";
      return 0;
    }
    if (sim->parsed()) {
      SnapshotSet S = ingest_csv(input);
      std::vector<int> assignment;
      int nc = 1;
      if (!assignment_file.empty()) {
        std::ifstream f(assignment_file);
        std::string line;
        std::getline(f, line);
        while (std::getline(f, line)) {
          const auto pos = line.find(',');
          if (pos == std::string::npos) continue;
          assignment.push_back(std::stoi(line.substr(pos + 1)));
        }
        nc = assignment.empty() ? 1 : 1 + *std::max_element(assignment.begin(), assignment.end());
      }
      // peek channel count from the rho file to choose the basis
      ReducedVectorField probe = ingest_rho_csv(rho_file, aff3_basis());
      ActionSpec spec = default_action(S, nc, assignment, probe.spline.channels());
      ReducedVectorField rho = ingest_rho_csv(rho_file, spec.group_basis);
      auto span = S.trajectory(S.trajectory_ids().front());
      std::vector<double> grid;
      for (const auto& r : span) grid.push_back(r.time);
      RomModel model{spec, rho, span.front().state};
      Trajectory recon = integrate_rom(
          model, grid, integrator == "lie_euler" ? Integrator::lie_euler : Integrator::rkmk4);
      SnapshotSet R;
      for (size_t k = 0; k < recon.states.size(); ++k) {
        SnapshotRecord rec;
        rec.traj = 0;
        rec.step = static_cast<int>(k);
        rec.time = recon.times[k];
        rec.param = Vector::Constant(1, 0.0);
        rec.state = recon.states[k];
        R.records.push_back(std::move(rec));
      }
      export_snapshots_csv(R, out_file);
      std::cout << "wrote " << out_file << '\n';
      return 0;
    }
    if (eval->parsed()) {
      SnapshotSet A = ingest_csv(input);
      SnapshotSet B = ingest_csv(recon_file);
      auto sa = A.trajectory(A.trajectory_ids().front());
      auto sb = B.trajectory(B.trajectory_ids().front());
      const size_t n = std::min(sa.size(), sb.size());
      ErrorCurve curve;
      for (size_t k = 0; k < n; ++k) {
        curve.times.push_back(sa[k].time);
        curve.errors.push_back(state_distance(sa[k].state, sb[k].state));
      }
      export_curve_csv(curve, out_file);
      std::cout << "final error = "
                << format17(curve.errors.empty() ? 0.0 : curve.errors.back()) << '\n';
      if (n_modes > 0) {
        PodError pe = pod_reconstruct_error(A, n_modes);
        std::cout << "pod error at " << n_modes << " modes: worst " << format17(pe.worst)
                  << ", mean " << format17(pe.mean) << '\n';
      }
      return 0;
    }
    if (width->parsed()) {
      SnapshotSet S = ingest_csv(input);
      std::vector<int> assignment;
      int nc = 1;
      if (!assignment_file.empty()) {
        std::ifstream f(assignment_file);
        std::string line;
        std::getline(f, line);
        while (std::getline(f, line)) {
          const auto pos = line.find(',');
          if (pos == std::string::npos) continue;
          assignment.push_back(std::stoi(line.substr(pos + 1)));
        }
        nc = assignment.empty() ? 1 : 1 + *std::max_element(assignment.begin(), assignment.end());
      }
      ActionSpec spec = default_action(S, nc, assignment, channels);
      WidthResult w = width_over_initial_conditions(S, spec);
      std::cout << "width = " << format17(w.width) << " (flagged " << w.flagged << ")\n";
      return w.flagged == 0 ? 0 : 1;
    }
    if (report->parsed()) {
      // re-render line plots from the CSVs present in the directory
      auto render = [&](const std::string& csv, const std::string& svg, const std::string& title,
                        bool logy) {
        const std::string path = out_dir + "/" + csv;
        std::ifstream f(path);
        if (!f) return;
        std::string line;
        std::getline(f, line);  // header
        PlotSeries ps;
        while (std::getline(f, line)) {
          const auto pos = line.find(',');
          if (pos == std::string::npos) continue;
          ps.x.push_back(std::stod(line.substr(0, pos)));
          ps.y.push_back(std::stod(line.substr(pos + 1)));
        }
        write_line_svg(out_dir + "/" + svg, title, logy ? "mode index" : "time (s)",
                       logy ? "sigma" : "error (m)", {ps}, logy);
      };
      render("error_full.csv", "error_full.svg", "Reconstruction error", false);
      render("error_step_ahead.csv", "error_step_ahead.svg", "Step-ahead error", false);
      render("pod_spectrum.csv", "pod_spectrum.svg", "Snapshot singular values", true);
      render("sg_spectrum.csv", "sg_spectrum.svg", "Reduced snapshot singular values", true);
      std::cout << "re-rendered plots in " << out_dir << '\n';
      return 0;
    }
    if (pipe->parsed()) {
      bench.family = parse_family(family);
      run.bench = bench;
      PipelineResult res = run_pipeline(run);
      for (const auto& flag : res.flags) std::cerr << "flag: " << flag << '\n';
      std::cout << "report: " << res.report_dir << "/summary.txt\n";
      return res.exit_status;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
