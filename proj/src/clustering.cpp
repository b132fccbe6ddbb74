#include "morlie/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace morlie {

namespace {

struct Windows {
  std::vector<int> start;  // step indices into each trajectory span
  std::vector<int> end;
};

Windows make_windows(int n_records, int n_windows) {
  const int n_trans = n_records - 1;
  const int nw = std::max(1, std::min(n_windows, n_trans));
  Windows w;
  for (int i = 0; i < nw; ++i) {
    w.start.push_back((i * n_trans) / nw);
    w.end.push_back(((i + 1) * n_trans) / nw);
  }
  return w;
}

/// median of |window displacement| / window dt over all (particle, traj, window)
double median_coarse_speed(const SnapshotSet& S, const Windows& w) {
  std::vector<double> speeds;
  for (int id : S.trajectory_ids()) {
    auto span = S.trajectory(id);
    for (size_t wi = 0; wi < w.start.size(); ++wi) {
      const auto& a = span[w.start[wi]].state;
      const auto& b = span[w.end[wi]].state;
      const double dt = span[w.end[wi]].time - span[w.start[wi]].time;
      for (int p = 0; p < a.count; ++p)
        speeds.push_back((b.coords.segment<3>(3 * p) - a.coords.segment<3>(3 * p)).norm() / dt);
    }
  }
  std::nth_element(speeds.begin(), speeds.begin() + speeds.size() / 2, speeds.end());
  return speeds[speeds.size() / 2];
}

/// Relative transform over a window composed from per-step generators.
Matrix window_transform(const GeneratorTrajectory& gen, int from_step, int to_step) {
  Matrix m = Matrix::Identity(4, 4);
  for (size_t k = 0; k < gen.steps.size(); ++k) {
    if (gen.steps[k] < from_step || gen.steps[k] >= to_step) continue;
    AlgebraElement a = gen.basis.combine(gen.coeffs.row(k).transpose());
    a.mat *= gen.dts[k];
    m = exp_map(a).mat * m;
  }
  return m;
}

}  // namespace

std::vector<int> filter_by_generator(const SnapshotSet& S, const GeneratorTrajectory& gen,
                                     double residual_tol, int n_windows) {
  if (S.chart() != Chart::pointcloud3d)
    throw std::invalid_argument("filter_by_generator: pointcloud snapshots required");
  const auto ids = S.trajectory_ids();
  const auto first = S.trajectory(ids.front());
  const int n_particles = first.front().state.count;
  const Windows w = make_windows(static_cast<int>(first.size()), n_windows);
  const double speed_scale = median_coarse_speed(S, w);

  // predicted window transforms are shared across trajectories
  std::vector<Matrix> pred;
  for (size_t wi = 0; wi < w.start.size(); ++wi)
    pred.push_back(window_transform(gen, first[w.start[wi]].step, first[w.end[wi]].step));

  // per-window residual speed averaged over trajectories, then worst window
  std::vector<std::vector<double>> acc(w.start.size(), std::vector<double>(n_particles, 0.0));
  for (int id : ids) {
    auto span = S.trajectory(id);
    for (size_t wi = 0; wi < w.start.size(); ++wi) {
      const auto& a = span[w.start[wi]].state;
      const auto& b = span[w.end[wi]].state;
      const double dt = span[w.end[wi]].time - span[w.start[wi]].time;
      const Matrix& m = pred[wi];
      for (int p = 0; p < n_particles; ++p) {
        const Eigen::Vector3d q =
            m.block<3, 3>(0, 0) * Eigen::Vector3d(a.coords.segment<3>(3 * p)) + m.block<3, 1>(0, 3);
        acc[wi][p] += (q - Eigen::Vector3d(b.coords.segment<3>(3 * p))).norm() / dt;
      }
    }
  }
  std::vector<double> worst(n_particles, 0.0);
  for (int p = 0; p < n_particles; ++p)
    for (size_t wi = 0; wi < w.start.size(); ++wi)
      worst[p] = std::max(worst[p], acc[wi][p] / static_cast<double>(ids.size()));

  std::vector<int> passing;
  for (int p = 0; p < n_particles; ++p)
    if (worst[p] <= residual_tol * speed_scale) passing.push_back(p);
  return passing;
}

ClusterSearchResult cluster_search(const SnapshotSet& S, int n_neighbors, double residual_tol,
                                   std::uint64_t rng_seed, int n_windows) {
  if (S.chart() != Chart::pointcloud3d)
    throw std::invalid_argument("cluster_search: pointcloud snapshots required");
  if (n_neighbors < 4)
    throw std::invalid_argument("cluster_search: need at least 4 neighbors for an affine fit");
  const auto ids = S.trajectory_ids();
  for (int id : ids)
    if (S.trajectory(id).size() < 2)
      throw std::invalid_argument("cluster_search: every trajectory needs >= 2 snapshots");

  const auto first = S.trajectory(ids.front());
  const int n_particles = first.front().state.count;
  const Windows w = make_windows(static_cast<int>(first.size()), n_windows);
  std::mt19937_64 rng(rng_seed);

  ClusterSearchResult out;
  out.assignment.assign(n_particles, -1);
  std::vector<int> unassigned(n_particles);
  for (int p = 0; p < n_particles; ++p) unassigned[p] = p;

  const Vector& frame0 = first.front().state.coords;
  auto fit_generator = [&](const std::vector<int>& members, GeneratorTrajectory& gen) -> bool {
    gen.basis = aff3_basis();
    gen.steps.clear();
    gen.times.clear();
    gen.dts.clear();
    gen.coeffs = Matrix::Zero(static_cast<Eigen::Index>(first.size()) - 1, gen.basis.size());
    int row = 0;
    std::vector<Vector> window_coeffs(w.start.size());
    for (size_t wi = 0; wi < w.start.size(); ++wi) {
      const int cols = static_cast<int>(members.size() * ids.size());
      Matrix src(3, cols), dst(3, cols);
      int c = 0;
      for (int id : ids) {
        auto span = S.trajectory(id);
        for (int p : members) {
          src.col(c) = span[w.start[wi]].state.coords.segment<3>(3 * p);
          dst.col(c) = span[w.end[wi]].state.coords.segment<3>(3 * p);
          ++c;
        }
      }
      AffineFit fit = fit_affine_map(src, dst);
      if (!fit.rank_ok) return false;
      const double dt = first[w.end[wi]].time - first[w.start[wi]].time;
      Matrix log_gen;
      try {
        log_gen = log_map(GroupElement(fit.transform)).mat / dt;
      } catch (const std::domain_error&) {
        return false;
      }
      window_coeffs[wi] = gen.basis.coefficients_of(AlgebraElement(log_gen));
    }
    // expand window fits to the per-transition grid
    for (size_t k = 0; k + 1 < first.size(); ++k) {
      size_t wi = 0;
      while (wi + 1 < w.start.size() && static_cast<int>(k) >= w.end[wi]) ++wi;
      gen.steps.push_back(first[k].step);
      gen.times.push_back(first[k].time);
      gen.dts.push_back(first[k + 1].time - first[k].time);
      gen.coeffs.row(row++) = window_coeffs[wi].transpose();
    }
    return true;
  };

  int retries = 0;
  while (!unassigned.empty()) {
    std::uniform_int_distribution<size_t> pick(0, unassigned.size() - 1);
    const int seed_particle = unassigned[pick(rng)];

    // nearest unassigned neighbors in the initial frame
    std::vector<int> members = unassigned;
    std::sort(members.begin(), members.end(), [&](int a, int b) {
      const double da = (frame0.segment<3>(3 * a) - frame0.segment<3>(3 * seed_particle)).norm();
      const double db = (frame0.segment<3>(3 * b) - frame0.segment<3>(3 * seed_particle)).norm();
      return da != db ? da < db : a < b;
    });
    if (static_cast<int>(members.size()) > n_neighbors + 1)
      members.resize(n_neighbors + 1);  // seed plus its n_neighbors nearest

    // grow the seed: fit, filter generously, refit on the claimed set, then
    // tighten to the contract tolerance; a neighborhood-sized seed cannot pin
    // the rotation part for far particles in one shot
    GeneratorTrajectory gen;
    std::vector<int> claimed;
    for (double relax : {3.0, 1.7, 1.0}) {
      if (!fit_generator(members, gen)) {
        claimed.clear();
        break;
      }
      claimed.clear();
      for (int p : filter_by_generator(S, gen, residual_tol * relax, n_windows))
        if (out.assignment[p] == -1) claimed.push_back(p);
      if (claimed.empty()) break;
      members = claimed;
    }
    if (claimed.empty()) {
      if (retries < 10) {
        ++retries;
        ++out.reseeds;
        continue;
      }
      claimed = {seed_particle};  // give up on this seed: singleton cluster
    }
    retries = 0;
    const int cluster = out.n_clusters++;
    for (int p : claimed) out.assignment[p] = cluster;
    out.generators.push_back(std::move(gen));
    std::erase_if(unassigned, [&](int p) { return out.assignment[p] != -1; });
  }
  return out;
}

}  // namespace morlie
