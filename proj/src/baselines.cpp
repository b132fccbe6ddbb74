#include "morlie/baselines.hpp"

#include "morlie/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace morlie {

double cloud_distance(const StatePoint& P, const StatePoint& Q, CloudDistanceMode mode) {
  if (P.chart != Chart::pointcloud3d || Q.chart != Chart::pointcloud3d)
    throw std::invalid_argument("cloud_distance: pointcloud states required");
  if (P.count != Q.count) throw std::invalid_argument("cloud_distance: particle count mismatch");
  double acc = 0.0;
  for (int i = 0; i < P.count; ++i) {
    const double d = (P.coords.segment<3>(3 * i) - Q.coords.segment<3>(3 * i)).norm();
    if (mode == CloudDistanceMode::max)
      acc = std::max(acc, d);
    else
      acc += d;
  }
  return mode == CloudDistanceMode::max ? acc : acc / P.count;
}

ErrorCurve trajectory_errors(const Trajectory& fom, const RomModel& rom, ErrorMode mode,
                             Integrator method) {
  ErrorCurve curve;
  if (fom.states.size() < 2) throw std::invalid_argument("trajectory_errors: short trajectory");
  if (mode == ErrorMode::full) {
    Trajectory recon = integrate_rom(rom, fom.times, method);
    for (size_t k = 0; k < fom.states.size(); ++k) {
      curve.times.push_back(fom.times[k]);
      curve.errors.push_back(state_distance(recon.states[k], fom.states[k]));
    }
  } else {
    curve.times.resize(fom.states.size() - 1);
    curve.errors.resize(fom.states.size() - 1);
    parallel_for(static_cast<int>(fom.states.size()) - 1, [&](int k) {
      RomModel seeded = rom;
      seeded.x0 = fom.states[k];
      const std::vector<double> grid{fom.times[k], fom.times[k + 1]};
      Trajectory one = integrate_rom(seeded, grid, method);
      curve.times[k] = fom.times[k + 1];
      curve.errors[k] = state_distance(one.states[1], fom.states[k + 1]);
    });
  }
  return curve;
}

int PodResult::modes_for_energy(double a) const {
  const double total = singular_values.sum();
  if (total <= 0.0) return 0;
  double acc = 0.0;
  int k = 0;
  while (k < singular_values.size() && acc <= a * total) {
    acc += singular_values(k);
    ++k;
  }
  return k;
}

PodResult pod_svd(const SnapshotSet& S, bool center, bool include_time_row) {
  if (S.records.empty()) throw std::invalid_argument("pod_svd: empty snapshot set");
  const int dim = S.records.front().state.dim() + (include_time_row ? 1 : 0);
  const int m = static_cast<int>(S.records.size());
  Matrix snap(dim, m);
  for (int j = 0; j < m; ++j) {
    snap.col(j).head(S.records[j].state.dim()) = S.records[j].state.coords;
    if (include_time_row) snap(dim - 1, j) = S.records[j].time;
  }
  PodResult out;
  out.centered = center;
  out.mean = Vector::Zero(dim);
  if (center) {
    out.mean = snap.rowwise().mean();
    snap.colwise() -= out.mean;
  }
  if (m > dim) {
    // Gram route: eigen-decompose snap * snap^T (dim x dim)
    Matrix gram = snap * snap.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    Vector lambda = eig.eigenvalues().reverse();
    Matrix vecs = eig.eigenvectors().rowwise().reverse();
    out.singular_values = lambda.cwiseMax(0.0).cwiseSqrt();
    out.modes = vecs;
  } else {
    Eigen::BDCSVD<Matrix> svd(snap, Eigen::ComputeThinU);
    out.singular_values = svd.singularValues();
    out.modes = svd.matrixU();
  }
  return out;
}

PodError pod_reconstruct_error(const SnapshotSet& S, int n_modes, bool center) {
  PodResult pod = pod_svd(S, center);
  const int rank = static_cast<int>(
      (pod.singular_values.array() > 1e-12 * pod.singular_values.maxCoeff()).count());
  if (n_modes > rank) throw std::invalid_argument("pod_reconstruct_error: n_modes exceeds rank");
  const Matrix basis = pod.modes.leftCols(n_modes);
  PodError err;
  for (const auto& r : S.records) {
    const Vector x = r.state.coords - pod.mean;
    const Vector proj = basis * (basis.transpose() * x) + pod.mean;
    StatePoint approx = r.state;
    approx.coords = proj;
    const double d = state_distance(r.state, approx);
    err.worst = std::max(err.worst, d);
    err.mean += d;
  }
  err.mean /= static_cast<double>(S.records.size());
  return err;
}

namespace {

/// Best orbit match for one snapshot; multi-start candidates then LM polish.
GroupMatch best_orbit_match(const ActionSpec& spec, const StatePoint& anchor, const StatePoint& x,
                            const Vector* warm, const LmConfig& cfg) {
  std::vector<Vector> starts;
  starts.push_back(Vector::Zero(spec.group_dim()));  // identity
  if (warm) starts.push_back(*warm);
  if (spec.kind == ActionKind::affine_cloud || spec.kind == ActionKind::clustered_affine) {
    // relative-transform start: per-cluster affine least squares, log-mapped
    Matrix big = Matrix::Zero(spec.ambient_dim, spec.ambient_dim);
    bool ok = true;
    for (int c = 0; c < spec.n_clusters && ok; ++c) {
      std::vector<int> members;
      for (int i = 0; i < anchor.count; ++i)
        if (spec.kind == ActionKind::affine_cloud || spec.cluster_assignment[i] == c)
          members.push_back(i);
      if (members.size() < 4) {
        ok = false;
        break;
      }
      Matrix src(3, members.size()), dst(3, members.size());
      for (size_t m = 0; m < members.size(); ++m) {
        src.col(m) = anchor.coords.segment<3>(3 * members[m]);
        dst.col(m) = x.coords.segment<3>(3 * members[m]);
      }
      AffineFit fit = fit_affine_map(src, dst);
      if (!fit.rank_ok) {
        ok = false;
        break;
      }
      try {
        big.block(4 * c, 4 * c, 4, 4) = log_map(GroupElement(fit.transform)).mat;
      } catch (const std::domain_error&) {
        ok = false;
      }
    }
    if (ok) starts.push_back(spec.group_basis.coefficients_of(AlgebraElement(big)));
  } else if (spec.kind == ActionKind::grid_translation) {
    // coarse scan over integer grid shifts (exact circular rotations)
    const int n = x.count;
    int best_m = 0;
    double best_d = std::numeric_limits<double>::infinity();
    Vector shifted(n);
    for (int m = 0; m < n; ++m) {
      for (int i = 0; i < n; ++i) shifted(i) = anchor.coords((i + m) % n);
      const double d = (shifted - x.coords).norm();
      if (d < best_d) {
        best_d = d;
        best_m = m;
      }
    }
    Vector c(1);
    c(0) = 2.0 * M_PI * best_m / n;
    starts.push_back(c);
  } else if (spec.kind == ActionKind::so2_polar) {
    Vector c(1);
    c(0) = x.coords(1) - anchor.coords(1);
    starts.push_back(c);
  }

  GroupMatch best;
  best.distance = std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    GroupMatch m = match_state(spec, anchor, x, s, cfg);
    if (m.distance < best.distance) best = m;
  }
  return best;
}

}  // namespace

WidthResult estimate_group_width(const SnapshotSet& S, const ActionSpec& spec,
                                 const StatePoint& anchor, double start_time, double horizon,
                                 const LmConfig& cfg) {
  std::vector<const SnapshotRecord*> window;
  for (const auto& r : S.records) {
    if (horizon >= 0.0 && (r.time < start_time || r.time > start_time + horizon)) continue;
    window.push_back(&r);
  }
  if (window.empty()) throw std::invalid_argument("estimate_group_width: empty snapshot window");
  WidthResult res;
  Vector warm;
  bool have_warm = false;
  for (const auto* r : window) {
    GroupMatch m = best_orbit_match(spec, anchor, r->state, have_warm ? &warm : nullptr, cfg);
    warm = m.coeffs;
    have_warm = true;
    res.width = std::max(res.width, m.distance);
    if (!m.converged) ++res.flagged;
  }
  return res;
}

WidthResult width_over_initial_conditions(const SnapshotSet& S, const ActionSpec& spec,
                                          const LmConfig& cfg) {
  WidthResult res;
  const auto ids = S.trajectory_ids();
  std::vector<WidthResult> per(ids.size());
  parallel_for(static_cast<int>(ids.size()), [&](int i) {
    auto span = S.trajectory(ids[i]);
    SnapshotSet one;
    one.records.assign(span.begin(), span.end());
    per[i] = estimate_group_width(one, spec, span.front().state, 0.0, -1.0, cfg);
  });
  for (const auto& w : per) {
    res.width = std::max(res.width, w.width);
    res.flagged += w.flagged;
  }
  return res;
}

}  // namespace morlie
