#pragma once

#include "morlie/fitting.hpp"

#include <cstdint>
#include <vector>

namespace morlie {

/// Per-transition affine generator coefficients (aff(3) basis) covering the
/// step grid of a snapshot set.
struct GeneratorTrajectory {
  AlgebraBasis basis;
  std::vector<int> steps;    // transition start steps
  std::vector<double> times;
  std::vector<double> dts;
  Matrix coeffs;             // n_transitions x dim(basis)
};

struct ClusterSearchResult {
  int n_clusters = 0;
  std::vector<int> assignment;  // particle -> cluster, clusters in creation order
  std::vector<GeneratorTrajectory> generators;
  int reseeds = 0;
};

/// Particles whose coarse-window velocities the generator trajectory explains
/// to within residual_tol times the median coarse particle speed. Residuals
/// compare measured window displacements against the relative transform
/// composed from the per-step generators; windows tame the noise that raw
/// per-step finite differences would amplify. The window count trades time
/// resolution against the measurement-noise floor sigma*sqrt(2)/dt_window,
/// which must stay below residual_tol times the median speed.
std::vector<int> filter_by_generator(const SnapshotSet& S, const GeneratorTrajectory& gen,
                                     double residual_tol, int n_windows = 4);

/// Nearest-neighbor seeded clustering: pick a random unassigned particle,
/// fit one affine generator trajectory to its n_neighbors nearest unassigned
/// neighbors (initial frame of the first trajectory), claim every particle the
/// generator explains, repeat. Deterministic for a fixed rng_seed.
ClusterSearchResult cluster_search(const SnapshotSet& S, int n_neighbors = 8,
                                   double residual_tol = 0.15, std::uint64_t rng_seed = 0,
                                   int n_windows = 4);

}  // namespace morlie
