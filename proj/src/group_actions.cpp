#include "morlie/group_actions.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace morlie {

StatePoint make_pointcloud(const Vector& coords) {
  if (coords.size() % 3 != 0)
    throw std::invalid_argument("make_pointcloud: coordinate count not divisible by 3");
  StatePoint x;
  x.coords = coords;
  x.chart = Chart::pointcloud3d;
  x.count = static_cast<int>(coords.size()) / 3;
  return x;
}

StatePoint make_polar(double q1, double q2) {
  if (!(q1 > 0.0)) throw std::invalid_argument("make_polar: q1 must be positive");
  StatePoint x;
  x.coords = Vector(2);
  x.coords << q1, q2;
  x.chart = Chart::polar2d;
  x.count = 1;
  return x;
}

StatePoint make_grid(const Vector& samples) {
  StatePoint x;
  x.coords = samples;
  x.chart = Chart::grid1d;
  x.count = static_cast<int>(samples.size());
  return x;
}

void validate_state(const StatePoint& x) {
  if (!x.coords.allFinite()) throw std::invalid_argument("state has non-finite coordinates");
  switch (x.chart) {
    case Chart::pointcloud3d:
      if (x.coords.size() != 3 * x.count)
        throw std::invalid_argument("pointcloud state: coords length != 3*N");
      break;
    case Chart::polar2d:
      if (x.coords.size() != 2) throw std::invalid_argument("polar state: need 2 coordinates");
      if (!(x.coords(0) > 0.0)) throw std::invalid_argument("polar state: q1 must be positive");
      break;
    case Chart::grid1d:
      if (x.coords.size() != x.count) throw std::invalid_argument("grid state: coords length != n");
      break;
  }
}

ActionSpec make_affine_cloud_action(AlgebraBasis basis) {
  ActionSpec s;
  s.kind = ActionKind::affine_cloud;
  if (basis.ambient_dim() != 4)
    throw std::invalid_argument("affine_cloud action: basis must be 4x4 aff(3) matrices");
  s.group_basis = std::move(basis);
  s.n_clusters = 1;
  s.ambient_dim = 4;
  return s;
}

ActionSpec make_clustered_affine_action(std::vector<int> assignment, int n_clusters) {
  if (n_clusters < 1) throw std::invalid_argument("clustered action: need n_clusters >= 1");
  std::vector<bool> seen(n_clusters, false);
  for (int c : assignment) {
    if (c < 0 || c >= n_clusters)
      throw std::invalid_argument("clustered action: assignment out of range");
    seen[c] = true;
  }
  for (bool s : seen)
    if (!s) throw std::invalid_argument("clustered action: assignment not surjective");
  ActionSpec s;
  s.kind = ActionKind::clustered_affine;
  s.group_basis = block_diagonal_basis(aff3_basis(), n_clusters);
  s.cluster_assignment = std::move(assignment);
  s.n_clusters = n_clusters;
  s.ambient_dim = 4 * n_clusters;
  return s;
}

ActionSpec make_grid_translation_action() {
  ActionSpec s;
  s.kind = ActionKind::grid_translation;
  Matrix gen = Matrix::Zero(2, 2);
  gen(0, 1) = 1.0;
  s.group_basis.elements = {AlgebraElement(gen)};
  s.group_basis.labels = {"shift"};
  s.n_clusters = 1;
  s.ambient_dim = 2;
  return s;
}

ActionSpec make_so2_polar_action() {
  ActionSpec s = make_grid_translation_action();
  s.kind = ActionKind::so2_polar;
  s.group_basis.labels = {"alpha"};
  return s;
}

GroupElement block_diag(const std::vector<GroupElement>& parts) {
  if (parts.empty()) throw std::invalid_argument("block_diag: empty");
  int n = 0;
  for (const auto& p : parts) n += p.ambient_dim();
  Matrix m = Matrix::Zero(n, n);
  int off = 0;
  for (const auto& p : parts) {
    const int d = p.ambient_dim();
    m.block(off, off, d, d) = p.mat;
    off += d;
  }
  return GroupElement(std::move(m));
}

GroupElement cluster_block(const GroupElement& g, int cluster) {
  return GroupElement(g.mat.block(4 * cluster, 4 * cluster, 4, 4));
}

GroupElement exp_for_action(const ActionSpec& spec, const AlgebraElement& a) {
  if (spec.kind == ActionKind::clustered_affine) {
    Matrix m = Matrix::Zero(spec.ambient_dim, spec.ambient_dim);
    for (int c = 0; c < spec.n_clusters; ++c)
      m.block(4 * c, 4 * c, 4, 4) = exp_map(AlgebraElement(a.mat.block(4 * c, 4 * c, 4, 4))).mat;
    return GroupElement(std::move(m));
  }
  return exp_map(a);
}

ActionSpec product_commuting(const std::vector<ActionSpec>& specs) {
  std::vector<const ActionSpec*> live;
  for (const auto& s : specs) {
    if (s.group_dim() == 0) continue;  // trivial group contributes nothing
    if (s.kind != ActionKind::affine_cloud && s.kind != ActionKind::clustered_affine)
      throw std::invalid_argument("product_commuting: only point-cloud actions combine");
    live.push_back(&s);
  }
  if (live.empty()) throw std::invalid_argument("product_commuting: all components trivial");
  if (live.size() == 1) return *live.front();

  size_t n_particles = 0;
  for (const auto* s : live) {
    if (s->cluster_assignment.empty())
      throw std::invalid_argument(
          "product_commuting: components need explicit particle blocks (-1 for unowned)");
    n_particles = std::max(n_particles, s->cluster_assignment.size());
  }
  std::vector<int> merged(n_particles, -1);
  AlgebraBasis basis;
  const int total_dim = 4 * [&] {
    int nc = 0;
    for (const auto* s : live) nc += s->n_clusters;
    return nc;
  }();
  int cluster_off = 0;
  for (const auto* s : live) {
    for (size_t p = 0; p < s->cluster_assignment.size(); ++p) {
      const int c = s->cluster_assignment[p];
      if (c < 0) continue;
      if (merged[p] != -1)
        throw std::invalid_argument("product_commuting: overlapping particle blocks");
      merged[p] = cluster_off + c;
    }
    // embed the component basis into the enlarged block-diagonal ambient
    for (int k = 0; k < s->group_basis.size(); ++k) {
      Matrix big = Matrix::Zero(total_dim, total_dim);
      big.block(4 * cluster_off, 4 * cluster_off, s->ambient_dim, s->ambient_dim) =
          s->group_basis.elements[k].mat;
      basis.elements.emplace_back(std::move(big));
      basis.labels.push_back("b" + std::to_string(cluster_off) + "." +
                             (s->group_basis.labels.empty() ? std::to_string(k)
                                                            : s->group_basis.labels[k]));
    }
    cluster_off += s->n_clusters;
  }
  for (size_t p = 0; p < merged.size(); ++p)
    if (merged[p] == -1)
      throw std::invalid_argument("product_commuting: particle " + std::to_string(p) +
                                  " not owned by any component");
  ActionSpec out;
  out.kind = ActionKind::clustered_affine;
  out.group_basis = std::move(basis);
  out.cluster_assignment = std::move(merged);
  out.n_clusters = cluster_off;
  out.ambient_dim = total_dim;
  return out;
}

namespace {

void check_compat(const ActionSpec& spec, const StatePoint& x) {
  validate_state(x);
  switch (spec.kind) {
    case ActionKind::affine_cloud:
      if (x.chart != Chart::pointcloud3d)
        throw std::invalid_argument("affine_cloud action needs a pointcloud state");
      break;
    case ActionKind::clustered_affine:
      if (x.chart != Chart::pointcloud3d)
        throw std::invalid_argument("clustered action needs a pointcloud state");
      if (static_cast<int>(spec.cluster_assignment.size()) != x.count)
        throw std::invalid_argument("clustered action: assignment does not cover the cloud");
      break;
    case ActionKind::grid_translation:
      if (x.chart != Chart::grid1d)
        throw std::invalid_argument("grid_translation action needs a grid state");
      break;
    case ActionKind::so2_polar:
      if (x.chart != Chart::polar2d)
        throw std::invalid_argument("so2_polar action needs a polar state");
      break;
  }
}

inline Eigen::Vector3d affine_apply(const Matrix& g, const Eigen::Vector3d& p) {
  return g.block<3, 3>(0, 0) * p + g.block<3, 1>(0, 3);
}

}  // namespace

Vector spectral_shift(const Vector& u, double s) {
  const int n = static_cast<int>(u.size());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> freq(n);
  std::vector<double> time(u.data(), u.data() + n);
  fft.fwd(freq, time);
  for (int m = 0; m < n; ++m) {
    int k = (m <= n / 2) ? m : m - n;
    if (2 * m == n) {
      freq[m] *= std::cos(k * s);  // keep the Nyquist bin real
    } else {
      freq[m] *= std::exp(std::complex<double>(0.0, k * s));
    }
  }
  std::vector<std::complex<double>> out(n);
  fft.inv(out, freq);
  Vector res(n);
  for (int i = 0; i < n; ++i) res(i) = out[i].real();
  return res;
}

Vector spectral_derivative(const Vector& u) {
  const int n = static_cast<int>(u.size());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> freq(n);
  std::vector<double> time(u.data(), u.data() + n);
  fft.fwd(freq, time);
  for (int m = 0; m < n; ++m) {
    int k = (m <= n / 2) ? m : m - n;
    if (2 * m == n) {
      freq[m] = 0.0;  // odd derivative kills the Nyquist mode
    } else {
      freq[m] *= std::complex<double>(0.0, static_cast<double>(k));
    }
  }
  std::vector<std::complex<double>> out(n);
  fft.inv(out, freq);
  Vector res(n);
  for (int i = 0; i < n; ++i) res(i) = out[i].real();
  return res;
}

StatePoint apply_action(const ActionSpec& spec, const GroupElement& g, const StatePoint& x) {
  check_compat(spec, x);
  if (g.ambient_dim() != spec.ambient_dim)
    throw std::invalid_argument("apply_action: group element size does not match the action");
  StatePoint out = x;
  switch (spec.kind) {
    case ActionKind::affine_cloud: {
      for (int i = 0; i < x.count; ++i)
        out.coords.segment<3>(3 * i) = affine_apply(g.mat, x.coords.segment<3>(3 * i));
      break;
    }
    case ActionKind::clustered_affine: {
      for (int i = 0; i < x.count; ++i) {
        const int c = spec.cluster_assignment[i];
        out.coords.segment<3>(3 * i) =
            g.mat.block<3, 3>(4 * c, 4 * c) * Eigen::Vector3d(x.coords.segment<3>(3 * i)) +
            g.mat.block<3, 1>(4 * c, 4 * c + 3);
      }
      break;
    }
    case ActionKind::grid_translation: {
      const double s = g.mat(0, 1);
      if (s != 0.0) out.coords = spectral_shift(x.coords, s);
      break;
    }
    case ActionKind::so2_polar: {
      out.coords(1) += g.mat(0, 1);
      break;
    }
  }
  return out;
}

Vector infinitesimal_generator(const ActionSpec& spec, const AlgebraElement& a,
                               const StatePoint& x) {
  check_compat(spec, x);
  if (a.ambient_dim() != spec.ambient_dim)
    throw std::invalid_argument("infinitesimal_generator: algebra element size mismatch");
  Vector v = Vector::Zero(x.dim());
  switch (spec.kind) {
    case ActionKind::affine_cloud: {
      for (int i = 0; i < x.count; ++i)
        v.segment<3>(3 * i) = a.mat.block<3, 3>(0, 0) * Eigen::Vector3d(x.coords.segment<3>(3 * i)) +
                              a.mat.block<3, 1>(0, 3);
      break;
    }
    case ActionKind::clustered_affine: {
      for (int i = 0; i < x.count; ++i) {
        const int c = spec.cluster_assignment[i];
        v.segment<3>(3 * i) =
            a.mat.block<3, 3>(4 * c, 4 * c) * Eigen::Vector3d(x.coords.segment<3>(3 * i)) +
            a.mat.block<3, 1>(4 * c, 4 * c + 3);
      }
      break;
    }
    case ActionKind::grid_translation:
      v = a.mat(0, 1) * spectral_derivative(x.coords);
      break;
    case ActionKind::so2_polar:
      v(1) = a.mat(0, 1);
      break;
  }
  return v;
}

Matrix generator_matrix_at(const ActionSpec& spec, const StatePoint& x) {
  Matrix cols(x.dim(), spec.group_dim());
  for (int k = 0; k < spec.group_dim(); ++k)
    cols.col(k) = infinitesimal_generator(spec, spec.group_basis.elements[k], x);
  return cols;
}

Vector metric_weights(const StatePoint& x) {
  switch (x.chart) {
    case Chart::pointcloud3d:
      return Vector::Constant(x.dim(), 1.0 / x.count);
    case Chart::polar2d: {
      Vector w(2);
      w << 1.0, x.coords(0) * x.coords(0);
      return w;
    }
    case Chart::grid1d:
      return Vector::Constant(x.dim(), 1.0 / x.count);
  }
  return Vector();
}

double state_distance(const StatePoint& a, const StatePoint& b) {
  if (a.chart != b.chart || a.dim() != b.dim())
    throw std::invalid_argument("state_distance: incompatible states");
  switch (a.chart) {
    case Chart::pointcloud3d: {
      double acc = 0.0;
      for (int i = 0; i < a.count; ++i)
        acc += (a.coords.segment<3>(3 * i) - b.coords.segment<3>(3 * i)).norm();
      return acc / a.count;
    }
    case Chart::polar2d: {
      const double dq1 = a.coords(0) - b.coords(0);
      const double dq2 = a.coords(1) - b.coords(1);
      return std::sqrt(dq1 * dq1 + a.coords(0) * a.coords(0) * dq2 * dq2);
    }
    case Chart::grid1d:
      return std::sqrt((a.coords - b.coords).squaredNorm() / a.count);
  }
  return 0.0;
}

AffineFit fit_affine_map(const Matrix& src, const Matrix& dst) {
  if (src.rows() != 3 || dst.rows() != 3 || src.cols() != dst.cols())
    throw std::invalid_argument("fit_affine_map: need matching 3xN point sets");
  const int n = static_cast<int>(src.cols());
  Matrix X(n, 4);
  X.block(0, 0, n, 3) = src.transpose();
  X.col(3).setOnes();
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(X);
  Matrix sol = cod.solve(dst.transpose());  // 4x3
  AffineFit fit;
  fit.transform = Matrix::Identity(4, 4);
  fit.transform.block<3, 3>(0, 0) = sol.topRows(3).transpose();
  fit.transform.block<3, 1>(0, 3) = sol.row(3).transpose();
  fit.rank_ok = cod.rank() == 4;
  return fit;
}

}  // namespace morlie
