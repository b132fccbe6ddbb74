#include "morlie/fitting.hpp"

#include "morlie/parallel.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace morlie {

Chart SnapshotSet::chart() const {
  if (records.empty()) throw std::invalid_argument("SnapshotSet: empty");
  return records.front().state.chart;
}

int SnapshotSet::n_trajectories() const { return static_cast<int>(trajectory_ids().size()); }

std::vector<int> SnapshotSet::trajectory_ids() const {
  std::vector<int> ids;
  for (const auto& r : records)
    if (ids.empty() || ids.back() != r.traj) ids.push_back(r.traj);
  return ids;
}

std::span<const SnapshotRecord> SnapshotSet::trajectory(int traj) const {
  size_t lo = 0;
  while (lo < records.size() && records[lo].traj != traj) ++lo;
  size_t hi = lo;
  while (hi < records.size() && records[hi].traj == traj) ++hi;
  return {records.data() + lo, hi - lo};
}

void SnapshotSet::sort_and_validate() {
  if (records.empty()) throw std::invalid_argument("SnapshotSet: empty");
  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return a.traj != b.traj ? a.traj < b.traj : a.step < b.step;
  });
  const Chart c = records.front().state.chart;
  const int dim = records.front().state.dim();
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    validate_state(r.state);
    if (r.state.chart != c || r.state.dim() != dim)
      throw std::invalid_argument("SnapshotSet: mixed charts or shapes");
    if (i > 0 && records[i - 1].traj == r.traj && !(records[i - 1].time < r.time))
      throw std::invalid_argument("SnapshotSet: times not strictly increasing in trajectory " +
                                  std::to_string(r.traj));
  }
}

Matrix ReducedSnapshotMatrix::stacked() const {
  Matrix m(basis.size(), static_cast<Eigen::Index>(columns.size()));
  for (size_t j = 0; j < columns.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = columns[j].coeffs;
  return m;
}

ProjectionResult project_vector_field(const ActionSpec& spec, const StatePoint& x,
                                      const Vector& v) {
  if (v.size() != x.dim()) throw std::invalid_argument("project_vector_field: shape mismatch");
  const Matrix gen = generator_matrix_at(spec, x);
  const Vector w = metric_weights(x).cwiseSqrt();
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(w.asDiagonal() * gen);
  ProjectionResult out;
  out.rho = cod.solve(w.asDiagonal() * v);
  out.residual = v - gen * out.rho;
  out.rank_deficient = cod.rank() < gen.cols();
  return out;
}

namespace {

struct Transition {
  const SnapshotRecord* from;
  const SnapshotRecord* to;
};

std::vector<std::vector<Transition>> transitions_per_trajectory(const SnapshotSet& S, int stride,
                                                                std::vector<std::string>& warnings) {
  if (stride < 1) throw std::invalid_argument("transition stride must be >= 1");
  std::vector<std::vector<Transition>> out;
  for (int id : S.trajectory_ids()) {
    auto span = S.trajectory(id);
    if (static_cast<int>(span.size()) < stride + 1) {
      warnings.push_back("trajectory " + std::to_string(id) + " has too few snapshots; skipped");
      continue;
    }
    std::vector<Transition> trans;
    for (size_t k = 0; k + stride < span.size(); ++k)
      trans.push_back({&span[k], &span[k + stride]});
    out.push_back(std::move(trans));
  }
  return out;
}

ReducedSnapshotColumn make_column(const Transition& t, int stride) {
  ReducedSnapshotColumn col;
  col.traj = t.from->traj;
  col.step = t.from->step;
  col.step_to = t.to->step;
  col.time = stride == 1 ? t.from->time : 0.5 * (t.from->time + t.to->time);
  return col;
}

double squared_metric_cost(const ActionSpec& spec, const Vector& coeffs, double dt,
                           const StatePoint& from, const StatePoint& to, const Vector& wsqrt,
                           Vector* residual_out = nullptr) {
  AlgebraElement a = spec.group_basis.combine(coeffs);
  a.mat *= dt;
  const StatePoint mapped = apply_action(spec, exp_for_action(spec, a), from);
  Vector r = wsqrt.asDiagonal() * (mapped.coords - to.coords);
  const double cost = r.squaredNorm();
  if (residual_out) *residual_out = std::move(r);
  return cost;
}

/// Closed-form warm start for affine kinds: per-cluster least-squares affine
/// map between the two clouds, pulled back through the principal log.
bool affine_log_start(const ActionSpec& spec, const Transition& t, double dt, Vector& coeffs_out) {
  if (spec.kind != ActionKind::affine_cloud && spec.kind != ActionKind::clustered_affine)
    return false;
  const int n = t.from->state.count;
  Matrix big = Matrix::Zero(spec.ambient_dim, spec.ambient_dim);
  for (int c = 0; c < spec.n_clusters; ++c) {
    std::vector<int> members;
    for (int i = 0; i < n; ++i)
      if (spec.kind == ActionKind::affine_cloud || spec.cluster_assignment[i] == c)
        members.push_back(i);
    if (members.size() < 4) return false;
    Matrix src(3, members.size()), dst(3, members.size());
    for (size_t m = 0; m < members.size(); ++m) {
      src.col(m) = t.from->state.coords.segment<3>(3 * members[m]);
      dst.col(m) = t.to->state.coords.segment<3>(3 * members[m]);
    }
    AffineFit fit = fit_affine_map(src, dst);
    if (!fit.rank_ok) return false;
    try {
      big.block(4 * c, 4 * c, 4, 4) = log_map(GroupElement(fit.transform)).mat / dt;
    } catch (const std::domain_error&) {
      return false;
    }
  }
  coeffs_out = spec.group_basis.coefficients_of(AlgebraElement(big));
  return true;
}

struct LmOutcome {
  Vector coeffs;
  double cost = 0.0;  // squared metric cost
  bool converged = true;
};

LmOutcome lm_minimize(const ActionSpec& spec, const StatePoint& from, const StatePoint& to,
                      double dt, const Vector& start, const LmConfig& cfg) {
  const Vector wsqrt = metric_weights(to).cwiseSqrt();
  const int dim = spec.group_dim();
  Vector c = start;
  Vector r;
  double cost = squared_metric_cost(spec, c, dt, from, to, wsqrt, &r);
  double lambda = cfg.damping_init;
  bool converged = false;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    if (cost < 1e-28) {
      converged = true;
      break;
    }
    Matrix J(r.size(), dim);
    for (int j = 0; j < dim; ++j) {
      const double h = 1e-7 * (1.0 + std::abs(c(j)));
      Vector cp = c;
      cp(j) += h;
      Vector rp;
      squared_metric_cost(spec, cp, dt, from, to, wsqrt, &rp);
      J.col(j) = (rp - r) / h;
    }
    const Vector grad = J.transpose() * r;
    if (grad.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) {
      converged = true;
      break;
    }
    bool accepted = false;
    Matrix JtJ = J.transpose() * J;
    while (lambda < 1e14) {
      Matrix A = JtJ + lambda * Matrix::Identity(dim, dim);
      const Vector step = A.ldlt().solve(-grad);
      Vector r_new;
      const double cost_new = squared_metric_cost(spec, c + step, dt, from, to, wsqrt, &r_new);
      if (cost_new < cost) {
        if (step.norm() <= 1e-12 * (1.0 + c.norm())) converged = true;
        c += step;
        r = std::move(r_new);
        cost = cost_new;
        lambda /= cfg.damping_down;
        accepted = true;
        break;
      }
      lambda *= cfg.damping_up;
    }
    if (!accepted || converged) break;  // damping exhausted or step stalled
  }
  return {c, cost, converged};
}

}  // namespace

std::vector<VelocitySample> finite_difference_velocities(const SnapshotSet& S,
                                                         int transition_stride) {
  std::vector<std::string> warnings;
  auto per_traj = transitions_per_trajectory(S, transition_stride, warnings);
  std::vector<VelocitySample> out;
  for (const auto& trans : per_traj)
    for (const auto& t : trans) {
      VelocitySample vs;
      vs.state = t.from->state;
      vs.velocity = (t.to->state.coords - t.from->state.coords) / (t.to->time - t.from->time);
      vs.time = t.from->time;
      vs.traj = t.from->traj;
      vs.step = t.from->step;
      vs.param = t.from->param;
      out.push_back(std::move(vs));
    }
  return out;
}

ReducedSnapshotMatrix fit_velocity_based(const ActionSpec& spec, const SnapshotSet& S,
                                         int transition_stride) {
  ReducedSnapshotMatrix out;
  out.basis = spec.group_basis;
  auto per_traj = transitions_per_trajectory(S, transition_stride, out.warnings);
  std::vector<Transition> flat;
  for (const auto& tr : per_traj) flat.insert(flat.end(), tr.begin(), tr.end());
  out.columns.resize(flat.size());
  parallel_for(static_cast<int>(flat.size()), [&](int i) {
    const Transition& t = flat[i];
    const double dt = t.to->time - t.from->time;
    const Vector v = (t.to->state.coords - t.from->state.coords) / dt;
    ProjectionResult proj = project_vector_field(spec, t.from->state, v);
    ReducedSnapshotColumn col = make_column(t, transition_stride);
    col.coeffs = std::move(proj.rho);
    col.rank_deficient = proj.rank_deficient;
    out.columns[i] = std::move(col);
  });
  return out;
}

ReducedSnapshotMatrix fit_velocity_free(const ActionSpec& spec, const SnapshotSet& S,
                                        const LmConfig& cfg, int transition_stride) {
  ReducedSnapshotMatrix out;
  out.basis = spec.group_basis;
  auto per_traj = transitions_per_trajectory(S, transition_stride, out.warnings);
  std::vector<std::vector<ReducedSnapshotColumn>> results(per_traj.size());
  // warm starts chain along each trajectory; trajectories run concurrently
  parallel_for(static_cast<int>(per_traj.size()), [&](int ti) {
    const auto& trans = per_traj[ti];
    std::vector<ReducedSnapshotColumn> cols;
    cols.reserve(trans.size());
    Vector prev;
    for (size_t k = 0; k < trans.size(); ++k) {
      const Transition& t = trans[k];
      const double dt = t.to->time - t.from->time;
      const Vector wsqrt = metric_weights(t.to->state).cwiseSqrt();
      Vector start;
      if (k == 0) {
        const Vector v = (t.to->state.coords - t.from->state.coords) / dt;
        start = project_vector_field(spec, t.from->state, v).rho;
      } else {
        start = prev;
      }
      Vector closed;
      if (affine_log_start(spec, t, dt, closed)) {
        const double c0 = squared_metric_cost(spec, start, dt, t.from->state, t.to->state, wsqrt);
        const double c1 = squared_metric_cost(spec, closed, dt, t.from->state, t.to->state, wsqrt);
        if (c1 < c0) start = closed;
      }
      LmOutcome lm = lm_minimize(spec, t.from->state, t.to->state, dt, start, cfg);
      prev = lm.coeffs;
      ReducedSnapshotColumn col = make_column(t, transition_stride);
      col.coeffs = std::move(lm.coeffs);
      AlgebraElement a = spec.group_basis.combine(col.coeffs);
      a.mat *= dt;
      col.fit_cost = state_distance(t.to->state, apply_action(spec, exp_for_action(spec, a), t.from->state));
      col.converged = lm.converged;
      cols.push_back(std::move(col));
    }
    results[ti] = std::move(cols);
  });
  for (auto& cols : results)
    out.columns.insert(out.columns.end(), std::make_move_iterator(cols.begin()),
                       std::make_move_iterator(cols.end()));
  return out;
}

ReducedSnapshotMatrix average_across_trajectories(const ReducedSnapshotMatrix& Sg) {
  std::map<std::pair<int, int>, std::vector<const ReducedSnapshotColumn*>> groups;
  for (const auto& col : Sg.columns) groups[{col.step, col.step_to}].push_back(&col);
  ReducedSnapshotMatrix out;
  out.basis = Sg.basis;
  out.warnings = Sg.warnings;
  for (const auto& [key, cols] : groups) {
    ReducedSnapshotColumn avg;
    avg.traj = -1;
    avg.step = key.first;
    avg.step_to = key.second;
    avg.coeffs = Vector::Zero(Sg.basis.size());
    for (const auto* c : cols) {
      avg.time += c->time;
      avg.coeffs += c->coeffs;
      avg.fit_cost += c->fit_cost;
      avg.converged = avg.converged && c->converged;
      avg.rank_deficient = avg.rank_deficient || c->rank_deficient;
    }
    const double n = static_cast<double>(cols.size());
    avg.time /= n;
    avg.coeffs /= n;
    avg.fit_cost /= n;
    out.columns.push_back(std::move(avg));
  }
  return out;
}

int rho_theta_sample_count(int n_columns, int stride) {
  if (n_columns <= 0 || stride < 1) return 0;
  int n = 1 + (n_columns - 1) / stride;
  if (((n_columns - 1) / stride) * stride != n_columns - 1) ++n;  // final sample kept
  return n;
}

ReducedVectorField fit_rho_theta(const ReducedSnapshotMatrix& Sg, int n_segments, int stride,
                                 double t_end) {
  if (Sg.columns.empty()) throw std::invalid_argument("fit_rho_theta: empty snapshot matrix");
  if (n_segments < 1) throw std::invalid_argument("fit_rho_theta: n_segments must be >= 1");
  if (stride < 1) throw std::invalid_argument("fit_rho_theta: stride must be >= 1");
  ReducedSnapshotMatrix avg = average_across_trajectories(Sg);
  std::vector<int> picks;
  for (int i = 0; i < static_cast<int>(avg.columns.size()); i += stride) picks.push_back(i);
  if (picks.back() != static_cast<int>(avg.columns.size()) - 1)
    picks.push_back(static_cast<int>(avg.columns.size()) - 1);
  const int m = static_cast<int>(picks.size());
  Vector times(m);
  Matrix samples(m, avg.basis.size());
  for (int i = 0; i < m; ++i) {
    times(i) = avg.columns[picks[i]].time;
    samples.row(i) = avg.columns[picks[i]].coeffs.transpose();
  }
  ReducedVectorField rho;
  rho.basis = avg.basis;
  rho.spline = HermiteSpline::least_squares_fit(times, samples, n_segments,
                                                std::numeric_limits<double>::quiet_NaN(), t_end);
  double sq = 0.0;
  for (int i = 0; i < m; ++i) sq += (rho.spline.eval(times(i)) - samples.row(i).transpose()).squaredNorm();
  rho.fit_rmse = std::sqrt(sq / (m * avg.basis.size()));
  return rho;
}

double evaluate_cost(const ActionSpec& spec, const SnapshotSet& S, const ReducedVectorField& rho,
                     CostMode mode) {
  std::vector<std::string> warnings;
  auto per_traj = transitions_per_trajectory(S, 1, warnings);
  const double eps = 1e-9 * (1.0 + std::abs(rho.t_max()));
  for (const auto& trans : per_traj)
    for (const auto& t : trans)
      if (t.from->time < rho.t_min() - eps || t.from->time > rho.t_max() + eps)
        throw std::invalid_argument("evaluate_cost: snapshot time outside rho domain");
  double total = 0.0;
  for (const auto& trans : per_traj) {
    for (const auto& t : trans) {
      const Vector coeffs = rho.eval(t.from->time);
      if (mode == CostMode::velocity_based) {
        const double dt = t.to->time - t.from->time;
        const Vector v = (t.to->state.coords - t.from->state.coords) / dt;
        const Vector diff = v - generator_matrix_at(spec, t.from->state) * coeffs;
        const Vector w = metric_weights(t.from->state);
        total += std::sqrt((w.array() * diff.array().square()).sum());
      } else {
        AlgebraElement a = spec.group_basis.combine(coeffs);
        a.mat *= (t.to->time - t.from->time);
        total += state_distance(t.to->state, apply_action(spec, exp_for_action(spec, a), t.from->state));
      }
    }
  }
  return total;
}

GroupMatch match_state(const ActionSpec& spec, const StatePoint& source, const StatePoint& target,
                       const Vector& start, const LmConfig& cfg) {
  if (spec.group_dim() == 0) {
    // trivial group: the orbit is the source point itself
    GroupMatch out;
    out.coeffs = Vector();
    out.distance = state_distance(target, source);
    return out;
  }
  LmOutcome lm = lm_minimize(spec, source, target, 1.0, start, cfg);
  GroupMatch out;
  AlgebraElement a = spec.group_basis.combine(lm.coeffs);
  out.distance = state_distance(target, apply_action(spec, exp_for_action(spec, a), source));
  out.coeffs = std::move(lm.coeffs);
  out.converged = lm.converged;
  return out;
}

double one_step_cost(const ActionSpec& spec, const SnapshotSet& S,
                     const ReducedSnapshotMatrix& Sg) {
  double total = 0.0;
  for (const auto& col : Sg.columns) {
    auto span = S.trajectory(col.traj);
    const SnapshotRecord* from = nullptr;
    const SnapshotRecord* to = nullptr;
    for (const auto& r : span) {
      if (r.step == col.step) from = &r;
      if (r.step == col.step_to) to = &r;
    }
    if (!from || !to) throw std::invalid_argument("one_step_cost: column does not match snapshots");
    AlgebraElement a = spec.group_basis.combine(col.coeffs);
    a.mat *= (to->time - from->time);
    total += state_distance(to->state, apply_action(spec, exp_for_action(spec, a), from->state));
  }
  return total;
}

}  // namespace morlie
