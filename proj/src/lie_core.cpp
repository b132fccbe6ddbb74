#include "morlie/lie_core.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace morlie {

bool is_finite(const Matrix& m) { return m.allFinite(); }

double frobenius_inner(const AlgebraElement& a, const AlgebraElement& b) {
  if (a.ambient_dim() != b.ambient_dim())
    throw std::invalid_argument("frobenius_inner: dimension mismatch");
  return (a.mat.array() * b.mat.array()).sum();
}

AlgebraElement AlgebraBasis::combine(const Vector& coeffs) const {
  if (coeffs.size() != size()) throw std::invalid_argument("combine: coefficient count mismatch");
  const int n = ambient_dim();
  Matrix acc = Matrix::Zero(n, n);
  for (int k = 0; k < size(); ++k) acc += coeffs(k) * elements[k].mat;
  return AlgebraElement(acc);
}

Vector AlgebraBasis::coefficients_of(const AlgebraElement& a) const {
  Vector c(size());
  for (int k = 0; k < size(); ++k) c(k) = frobenius_inner(elements[k], a);
  return c;
}

GroupElement exp_map(const AlgebraElement& a) {
  if (a.mat.rows() != a.mat.cols()) throw std::invalid_argument("exp_map: matrix not square");
  if (!is_finite(a.mat)) throw std::invalid_argument("exp_map: non-finite input");
  return GroupElement(a.mat.exp());
}

AlgebraElement log_map(const GroupElement& g) {
  if (g.mat.rows() != g.mat.cols()) throw std::invalid_argument("log_map: matrix not square");
  if (!is_finite(g.mat)) throw std::invalid_argument("log_map: non-finite input");
  // principal log requires no eigenvalue on the closed negative real axis
  Eigen::EigenSolver<Matrix> es(g.mat, false);
  const auto& ev = es.eigenvalues();
  const double scale = g.mat.norm();
  for (int i = 0; i < ev.size(); ++i) {
    const double re = ev(i).real(), im = ev(i).imag();
    if (re <= 0.0 && std::abs(im) < 1e-12 * (1.0 + scale)) {
      std::ostringstream msg;
      msg << "log_map: eigenvalue " << re << (im < 0 ? "-" : "+") << std::abs(im)
          << "i lies on the closed negative real axis";
      throw std::domain_error(msg.str());
    }
  }
  return AlgebraElement(g.mat.log());
}

AlgebraElement bracket(const AlgebraElement& a, const AlgebraElement& b) {
  if (a.ambient_dim() != b.ambient_dim())
    throw std::invalid_argument("bracket: dimension mismatch");
  return AlgebraElement(a.mat * b.mat - b.mat * a.mat);
}

AlgebraBasis basis_orthonormalize(const std::vector<AlgebraElement>& raw, double rank_tol) {
  AlgebraBasis out;
  if (raw.empty()) return out;
  const int n = raw.front().ambient_dim();
  double max_norm = 0.0;
  for (const auto& a : raw) {
    if (a.ambient_dim() != n) throw std::invalid_argument("basis_orthonormalize: mixed dimensions");
    max_norm = std::max(max_norm, a.norm());
  }
  if (max_norm == 0.0) return out;  // all-zero input: empty basis, not an error
  // modified Gram-Schmidt with a second orthogonalization pass
  for (const auto& a : raw) {
    Matrix v = a.mat;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& e : out.elements) v -= (v.array() * e.mat.array()).sum() * e.mat;
    const double r = v.norm();
    if (r > rank_tol * max_norm) out.elements.emplace_back(v / r);
  }
  return out;
}

namespace {

Matrix unit4(int r, int c) {
  Matrix m = Matrix::Zero(4, 4);
  m(r, c) = 1.0;
  return m;
}

}  // namespace

AlgebraBasis so3_basis() {
  AlgebraBasis b;
  Matrix lx = Matrix::Zero(3, 3), ly = Matrix::Zero(3, 3), lz = Matrix::Zero(3, 3);
  lx(1, 2) = -1; lx(2, 1) = 1;
  ly(0, 2) = 1;  ly(2, 0) = -1;
  lz(0, 1) = -1; lz(1, 0) = 1;
  b.elements = {AlgebraElement(lx), AlgebraElement(ly), AlgebraElement(lz)};
  b.labels = {"Lx", "Ly", "Lz"};
  return b;
}

AlgebraBasis se3_basis() {
  AlgebraBasis b;
  const double s = 1.0 / std::sqrt(2.0);  // unit Frobenius norm
  Matrix wx = Matrix::Zero(4, 4), wy = Matrix::Zero(4, 4), wz = Matrix::Zero(4, 4);
  wx(1, 2) = -s; wx(2, 1) = s;
  wy(0, 2) = s;  wy(2, 0) = -s;
  wz(0, 1) = -s; wz(1, 0) = s;
  b.elements = {AlgebraElement(wx),        AlgebraElement(wy),        AlgebraElement(wz),
                AlgebraElement(unit4(0, 3)), AlgebraElement(unit4(1, 3)), AlgebraElement(unit4(2, 3))};
  b.labels = {"wx", "wy", "wz", "vx", "vy", "vz"};
  return b;
}

AlgebraBasis aff3_basis() {
  AlgebraBasis b;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      b.elements.emplace_back(unit4(i, j));
      b.labels.push_back("E" + std::to_string(i) + std::to_string(j));
    }
  for (int i = 0; i < 3; ++i) {
    b.elements.emplace_back(unit4(i, 3));
    b.labels.push_back("t" + std::to_string(i));
  }
  return b;
}

AlgebraBasis translation3_basis() {
  AlgebraBasis b;
  for (int i = 0; i < 3; ++i) {
    b.elements.emplace_back(unit4(i, 3));
    b.labels.push_back("t" + std::to_string(i));
  }
  return b;
}

AlgebraBasis scaling_translation3_basis() {
  AlgebraBasis b = translation3_basis();
  Matrix s = Matrix::Zero(4, 4);
  s(0, 0) = s(1, 1) = s(2, 2) = 1.0 / std::sqrt(3.0);
  b.elements.emplace_back(s);
  b.labels.push_back("scale");
  return b;
}

AlgebraBasis sl3_translation_basis() {
  AlgebraBasis b;
  // traceless linear parts: off-diagonals plus two diagonal differences
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) {
        b.elements.emplace_back(unit4(i, j));
        b.labels.push_back("E" + std::to_string(i) + std::to_string(j));
      }
  Matrix d1 = (unit4(0, 0) - unit4(1, 1)) / std::sqrt(2.0);
  Matrix d2 = (unit4(0, 0) + unit4(1, 1) - 2.0 * unit4(2, 2)) / std::sqrt(6.0);
  b.elements.emplace_back(d1);
  b.labels.push_back("d1");
  b.elements.emplace_back(d2);
  b.labels.push_back("d2");
  for (int i = 0; i < 3; ++i) {
    b.elements.emplace_back(unit4(i, 3));
    b.labels.push_back("t" + std::to_string(i));
  }
  return b;
}

AlgebraBasis block_diagonal_basis(const AlgebraBasis& per_block, int n_blocks) {
  if (n_blocks < 1) throw std::invalid_argument("block_diagonal_basis: need n_blocks >= 1");
  const int nb = per_block.ambient_dim();
  const int n = nb * n_blocks;
  AlgebraBasis out;
  for (int c = 0; c < n_blocks; ++c)
    for (int k = 0; k < per_block.size(); ++k) {
      Matrix m = Matrix::Zero(n, n);
      m.block(c * nb, c * nb, nb, nb) = per_block.elements[k].mat;
      out.elements.emplace_back(std::move(m));
      std::string lbl = per_block.labels.empty() ? ("e" + std::to_string(k)) : per_block.labels[k];
      out.labels.push_back("c" + std::to_string(c) + "." + lbl);
    }
  return out;
}

bool is_aff3_algebra(const AlgebraElement& a, double tol) {
  if (a.ambient_dim() != 4) return false;
  return a.mat.row(3).cwiseAbs().maxCoeff() <= tol;
}

bool is_se3_algebra(const AlgebraElement& a, double tol) {
  if (!is_aff3_algebra(a, tol)) return false;
  Matrix w = a.mat.block(0, 0, 3, 3);
  return (w + w.transpose()).norm() <= tol * (1.0 + w.norm());
}

bool is_aff3_group(const GroupElement& g, double tol) {
  if (g.ambient_dim() != 4) return false;
  Eigen::RowVector4d want(0, 0, 0, 1);
  return (g.mat.row(3) - want).norm() <= tol;
}

bool is_se3_group(const GroupElement& g, double tol) {
  if (!is_aff3_group(g, tol)) return false;
  Matrix r = g.mat.block(0, 0, 3, 3);
  if ((r.transpose() * r - Matrix::Identity(3, 3)).norm() > tol) return false;
  return r.determinant() > 0.0;
}

}  // namespace morlie
