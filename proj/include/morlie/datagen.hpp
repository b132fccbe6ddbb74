#pragma once

#include "morlie/fitting.hpp"
#include "morlie/hermite.hpp"

#include <cstdint>
#include <vector>

namespace morlie {

enum class Family { rigid, sheering, radial, transport };

/// Deterministic synthetic benchmark configuration. All randomness derives
/// from `seed`; per-trajectory streams keep generation order-independent.
struct BenchmarkConfig {
  Family family = Family::rigid;
  int n_traj = 9;
  int n_steps = 999;  // snapshots are steps 0..n_steps
  double horizon = 5.0;
  double sigma = 0.01;
  std::uint64_t seed = 1;

  // rigid cloud
  int n_particles = 99;
  double amp_rotation = 1.0;     // rad/s
  double amp_translation = 0.6;  // m/s
  double amp_shear = 0.4;        // 1/s
  int spline_knots = 5;
  Vector constant_twist;  // (wx,wy,wz,vx,vy,vz); overrides the spline when set

  // sheering clusters
  int n_clusters = 2;
  int particles_per_cluster = 100;
  double cluster_spacing = 2.0;  // centers along x
  std::vector<Vector> constant_generators;  // per-cluster 12-channel override

  // radial oscillator
  std::vector<double> mu_values = {0.5, 1.0, 1.5, 2.0};
  double q1_0 = 1.0;
  double q2_0 = 0.25;
  double radial_a = 100.0;
  int radial_b = 40;
  bool exact_circle = false;  // a -> infinity limit: q1 frozen

  // linear transport
  int grid_size = 256;
  std::vector<double> mu1_values = {-1.0, 0.5, 2.0};
  std::vector<int> mu2_values = {1, 2, 3};

  void validate() const;
};

/// Ground truth of the rigid benchmark: body-twist channels (wx,wy,wz,vx,vy,vz),
/// the integrated pose per step and the equivalent spatial twist (the reduced
/// vector field a ROM on the same action would need).
struct RigidTruth {
  HermiteSpline twist;  // 6 channels, body frame
  std::vector<GroupElement> path;
  std::vector<Matrix> spatial_twist;  // H T H^{-1} per step, 4x4
};

struct SheeringTruth {
  // per-cluster generator channels (wx,wy,wz, s12,s13,s23, d1,d2,d3, b1,b2,b3)
  std::vector<HermiteSpline> generators;
  std::vector<std::vector<GroupElement>> paths;  // [cluster][step]
  std::vector<int> assignment;                   // particle -> cluster
};

std::pair<SnapshotSet, RigidTruth> gen_rigid_cloud(const BenchmarkConfig& cfg);
std::pair<SnapshotSet, SheeringTruth> gen_sheering_clouds(const BenchmarkConfig& cfg);
SnapshotSet gen_radial_oscillator(const BenchmarkConfig& cfg);
SnapshotSet gen_linear_transport(const BenchmarkConfig& cfg);

/// Assemble the 4x4 body twist from classic channels (wx,wy,wz,vx,vy,vz).
Matrix twist_matrix(const Vector& channels);
/// Assemble the 4x4 affine generator from the 12 sheering channels.
Matrix affine_generator_matrix(const Vector& channels);

}  // namespace morlie
