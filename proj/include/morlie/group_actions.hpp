#pragma once

#include "morlie/lie_core.hpp"

#include <vector>

namespace morlie {

enum class Chart { pointcloud3d, polar2d, grid1d };

/// A manifold point in a fixed global chart.
///  pointcloud3d: coords = (x0,y0,z0, x1,y1,z1, ...), count = particle count
///  polar2d:      coords = (q1, q2) with q1 > 0, count = 1
///  grid1d:       coords = samples of a periodic function on [0, 2pi), count = grid size
struct StatePoint {
  Vector coords;
  Chart chart = Chart::pointcloud3d;
  int count = 0;

  int dim() const { return static_cast<int>(coords.size()); }
};

StatePoint make_pointcloud(const Vector& coords);
StatePoint make_polar(double q1, double q2);
StatePoint make_grid(const Vector& samples);

void validate_state(const StatePoint& x);

enum class ActionKind { affine_cloud, clustered_affine, grid_translation, so2_polar };

/// A concrete group action together with the basis of the acting algebra.
/// Product groups (clustered_affine) embed block-diagonally: a group element
/// for n_clusters clusters is one (4*n_clusters) square matrix.
struct ActionSpec {
  ActionKind kind = ActionKind::affine_cloud;
  AlgebraBasis group_basis;
  std::vector<int> cluster_assignment;  // particle -> cluster; -1 = not acted on
  int n_clusters = 1;
  int ambient_dim = 4;

  int group_dim() const { return group_basis.size(); }
};

/// Affine action of one group copy on every particle of a cloud.
ActionSpec make_affine_cloud_action(AlgebraBasis basis = aff3_basis());

/// Product of affine copies acting on assigned particle clusters.
ActionSpec make_clustered_affine_action(std::vector<int> assignment, int n_clusters);

/// (R,+) acting on sampled periodic functions by coordinate shift.
ActionSpec make_grid_translation_action();

/// Rotation-angle action on the polar chart, (q1, q2) -> (q1, q2 + alpha).
ActionSpec make_so2_polar_action();

/// Combine component actions on structurally disjoint particle blocks into a
/// single product action. Overlapping blocks -> std::invalid_argument.
/// Components with a zero-dimensional algebra (trivial group) are dropped.
ActionSpec product_commuting(const std::vector<ActionSpec>& specs);

/// Pack per-cluster group elements into the block-diagonal product element.
GroupElement block_diag(const std::vector<GroupElement>& parts);
GroupElement cluster_block(const GroupElement& g, int cluster);

/// exp that exploits the block-diagonal structure of clustered product groups
/// (exp of a block-diagonal matrix is the block-diagonal of the block exps).
GroupElement exp_for_action(const ActionSpec& spec, const AlgebraElement& a);

StatePoint apply_action(const ActionSpec& spec, const GroupElement& g, const StatePoint& x);

/// d/dt at t=0 of Phi(exp(a t), x), in closed form per action kind.
Vector infinitesimal_generator(const ActionSpec& spec, const AlgebraElement& a,
                               const StatePoint& x);

/// Columns are the generators of the basis elements at x; the column span is
/// the induced distribution at x.
Matrix generator_matrix_at(const ActionSpec& spec, const StatePoint& x);

// --- chart metric ----------------------------------------------------------

/// Diagonal weights of the chart inner product at x:
///  pointcloud3d: 1/N per coordinate; polar2d: (1, q1^2); grid1d: 1/n.
Vector metric_weights(const StatePoint& x);

/// Chart distance: mean per-particle norm for clouds (the natural point-cloud
/// metric), sqrt(dq1^2 + q1^2 dq2^2) on the polar chart, root-mean-square on
/// grids.
double state_distance(const StatePoint& a, const StatePoint& b);

// --- utilities --------------------------------------------------------------

/// Best affine map src -> dst in least squares (src, dst are 3 x N).
/// rank_ok reports whether the normal system had full rank.
struct AffineFit {
  Matrix transform;  // 4x4 homogeneous
  bool rank_ok = true;
};
AffineFit fit_affine_map(const Matrix& src, const Matrix& dst);

/// Spectral shift of samples of a periodic function: u(x) -> u(x + s).
Vector spectral_shift(const Vector& u, double s);
/// Spectral derivative du/dx on the periodic grid.
Vector spectral_derivative(const Vector& u);

}  // namespace morlie
