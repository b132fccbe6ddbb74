#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace morlie {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Element of a matrix Lie algebra, embedded in an ambient n x n space.
/// aff(3) elements are 4x4 with zero bottom row.
struct AlgebraElement {
  Matrix mat;

  AlgebraElement() = default;
  explicit AlgebraElement(Matrix m) : mat(std::move(m)) {}
  int ambient_dim() const { return static_cast<int>(mat.rows()); }
  double norm() const { return mat.norm(); }
};

/// Element of a matrix Lie group (invertible n x n). Aff(3) elements are
/// 4x4 homogeneous with bottom row (0,0,0,1).
struct GroupElement {
  Matrix mat;

  GroupElement() = default;
  explicit GroupElement(Matrix m) : mat(std::move(m)) {}
  static GroupElement identity(int n) { return GroupElement(Matrix::Identity(n, n)); }
  int ambient_dim() const { return static_cast<int>(mat.rows()); }
};

/// Ordered basis of a matrix Lie algebra. Orthonormal under the Frobenius
/// inner product when produced by basis_orthonormalize or the standard
/// factories below.
struct AlgebraBasis {
  std::vector<AlgebraElement> elements;
  std::vector<std::string> labels;

  int size() const { return static_cast<int>(elements.size()); }
  int ambient_dim() const { return elements.empty() ? 0 : elements.front().ambient_dim(); }

  /// Linear combination sum_k coeffs[k] * elements[k].
  AlgebraElement combine(const Vector& coeffs) const;

  /// Frobenius projection coefficients of a onto this (orthonormal) basis.
  Vector coefficients_of(const AlgebraElement& a) const;
};

/// A bracket-closed subspace of a parent algebra.
struct Subalgebra {
  AlgebraBasis basis;
  int parent_dim = 0;
  double closure_residual = 0.0;  // max relative out-of-span norm of pairwise brackets
  bool closed = true;
  int rounds = 0;  // closure rounds taken
};

double frobenius_inner(const AlgebraElement& a, const AlgebraElement& b);

/// Matrix exponential (scaling-and-squaring). Throws std::invalid_argument on
/// non-finite input.
GroupElement exp_map(const AlgebraElement& a);

/// Principal matrix logarithm. Throws std::domain_error (naming the offending
/// eigenvalue) if an eigenvalue lies on the closed negative real axis.
AlgebraElement log_map(const GroupElement& g);

/// Matrix commutator ab - ba. Dimension mismatch -> std::invalid_argument.
AlgebraElement bracket(const AlgebraElement& a, const AlgebraElement& b);

/// Gram-Schmidt under the Frobenius inner product. Elements whose residual
/// after projection is below rank_tol times the largest input norm are
/// dropped. All-zero input yields an empty basis.
AlgebraBasis basis_orthonormalize(const std::vector<AlgebraElement>& raw, double rank_tol = 1e-10);

// --- standard bases -------------------------------------------------------

/// so(3) generators L_x, L_y, L_z (classic normalization, [L_x,L_y] = L_z).
AlgebraBasis so3_basis();

/// se(3) as 4x4: three rotations, three translations; Frobenius-orthonormal.
AlgebraBasis se3_basis();

/// aff(3) as 4x4: the nine elementary linear-part generators E_ij plus three
/// translations; Frobenius-orthonormal.
AlgebraBasis aff3_basis();

/// Pure translations in aff(3), 4x4.
AlgebraBasis translation3_basis();

/// Uniform scaling plus translations (4-dimensional subalgebra of aff(3)).
AlgebraBasis scaling_translation3_basis();

/// sl(3) (traceless linear parts) plus translations, 11-dimensional.
AlgebraBasis sl3_translation_basis();

/// Block-diagonal embedding of per-cluster bases: element k of cluster c maps
/// to a matrix supported on the c-th diagonal block.
AlgebraBasis block_diagonal_basis(const AlgebraBasis& per_block, int n_blocks);

// --- structure predicates (used by invariants and tests) -------------------

bool is_finite(const Matrix& m);
/// Bottom row exactly zero (aff(3) algebra embedding).
bool is_aff3_algebra(const AlgebraElement& a, double tol = 0.0);
/// Upper-left 3x3 block antisymmetric, bottom row zero.
bool is_se3_algebra(const AlgebraElement& a, double tol = 1e-12);
/// Bottom row equals (0,0,0,1).
bool is_aff3_group(const GroupElement& g, double tol = 1e-9);
/// Rotation block orthogonal with positive determinant, bottom row (0,0,0,1).
bool is_se3_group(const GroupElement& g, double tol = 1e-9);

}  // namespace morlie
