#include "morlie/subalgebra.hpp"

#include <algorithm>
#include <stdexcept>

namespace morlie {

namespace {

Matrix vectorized(const AlgebraBasis& b) {
  const int n = b.ambient_dim();
  Matrix q(n * n, b.size());
  for (int k = 0; k < b.size(); ++k)
    q.col(k) = Eigen::Map<const Vector>(b.elements[k].mat.data(), n * n);
  return q;
}

double closure_residual_of(const AlgebraBasis& basis, std::vector<AlgebraElement>* brackets_out) {
  const int d = basis.size();
  double worst = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      AlgebraElement br = bracket(basis.elements[i], basis.elements[j]);
      if (brackets_out) brackets_out->push_back(br);
      // out-of-span norm relative to the natural bracket scale |Ei||Ej|,
      // so a noise-sized bracket of commuting elements reads as small
      const double scale = basis.elements[i].norm() * basis.elements[j].norm();
      if (scale < 1e-300) continue;
      Matrix oos = br.mat;
      for (const auto& e : basis.elements) oos -= frobenius_inner(AlgebraElement(oos), e) * e.mat;
      worst = std::max(worst, oos.norm() / scale);
    }
  return worst;
}

}  // namespace

double subspace_alignment_defect(const AlgebraBasis& a, const AlgebraBasis& b) {
  if (a.size() == 0 || b.size() == 0) return 1.0;
  if (a.ambient_dim() != b.ambient_dim()) return 1.0;
  AlgebraBasis qa = basis_orthonormalize(a.elements);
  AlgebraBasis qb = basis_orthonormalize(b.elements);
  Matrix cross = vectorized(qa).transpose() * vectorized(qb);
  Eigen::JacobiSVD<Matrix> svd(cross);
  // principal angles have cosines = singular values; for unequal dimensions
  // the smaller basis must embed, so compare against min(dim) values
  const int k = std::min(qa.size(), qb.size());
  double cmin = 1.0;
  for (int i = 0; i < k; ++i) cmin = std::min(cmin, svd.singularValues()(i));
  if (qa.size() != qb.size()) return 1.0;
  return 1.0 - cmin;
}

LibraryMatch match_subalgebra_library(const AlgebraBasis& found, double match_tol) {
  if (found.size() == 0) return {};
  const int n = found.ambient_dim();
  if (n % 4 == 0 && n > 4) {
    // product algebra: split the span by block projection and match per factor
    const int nb = n / 4;
    std::vector<AlgebraBasis> blocks(nb);
    int split_dim = 0;
    for (int c = 0; c < nb; ++c) {
      std::vector<AlgebraElement> restricted;
      for (const auto& e : found.elements)
        restricted.emplace_back(Matrix(e.mat.block(4 * c, 4 * c, 4, 4)));
      // restrictions of foreign-factor directions are identification noise;
      // keep only block components with non-negligible weight
      blocks[c] = basis_orthonormalize(restricted, 0.05);
      split_dim += blocks[c].size();
    }
    if (split_dim != found.size()) return {};  // span is not a plain product
    LibraryMatch out;
    out.defect = 0.0;
    std::vector<AlgebraBasis> factor_bases;
    for (int c = 0; c < nb; ++c) {
      LibraryMatch m = match_subalgebra_library(blocks[c], match_tol);
      if (m.name.empty()) return {};
      out.name += (c ? " x " : "") + m.name;
      out.defect = std::max(out.defect, m.defect);
      factor_bases.push_back(std::move(m.basis));
    }
    // embed the canonical factor bases block-diagonally
    for (int c = 0; c < nb; ++c)
      for (int k = 0; k < factor_bases[c].size(); ++k) {
        Matrix big = Matrix::Zero(n, n);
        big.block(4 * c, 4 * c, 4, 4) = factor_bases[c].elements[k].mat;
        out.basis.elements.emplace_back(std::move(big));
        out.basis.labels.push_back("c" + std::to_string(c) + "." +
                                   (factor_bases[c].labels.empty()
                                        ? std::to_string(k)
                                        : factor_bases[c].labels[k]));
      }
    return out;
  }
  if (n != 4) return {};

  struct Candidate {
    std::string name;
    AlgebraBasis basis;
  };
  static const std::vector<Candidate> library = [] {
    std::vector<Candidate> lib;
    AlgebraBasis so3in4;
    {
      AlgebraBasis se3 = se3_basis();
      so3in4.elements = {se3.elements[0], se3.elements[1], se3.elements[2]};
    }
    lib.push_back({"so(3)", so3in4});
    lib.push_back({"translations", translation3_basis()});
    lib.push_back({"scalings+translations", scaling_translation3_basis()});
    lib.push_back({"se(3)", se3_basis()});
    lib.push_back({"sl(3)+translations", sl3_translation_basis()});
    lib.push_back({"aff(3)", aff3_basis()});
    return lib;
  }();

  LibraryMatch out;
  for (const auto& cand : library) {
    if (cand.basis.size() != found.size()) continue;
    const double d = subspace_alignment_defect(found, cand.basis);
    if (d < out.defect) {
      out.defect = d;
      out.name = cand.name;
      out.basis = cand.basis;
    }
  }
  if (out.defect >= match_tol) {
    out.name.clear();
    out.basis = AlgebraBasis{};
  }
  return out;
}

Subalgebra bracket_closure(const AlgebraBasis& basis, double closure_tol, int max_rounds) {
  Subalgebra out;
  out.basis = basis_orthonormalize(basis.elements);
  out.parent_dim = basis.ambient_dim() * basis.ambient_dim();
  out.rounds = 0;
  if (out.basis.size() == 0) {
    out.closure_residual = 0.0;
    out.closed = true;
    return out;
  }
  for (;;) {
    ++out.rounds;  // every span(h) == span(Bracket(h,h)) check is one round
    std::vector<AlgebraElement> brackets;
    const double residual = closure_residual_of(out.basis, &brackets);
    out.closure_residual = residual;
    if (residual <= closure_tol) {
      out.closed = true;
      break;
    }
    if (out.rounds > max_rounds) {
      out.closed = false;
      break;
    }
    // Basis(Bracket(h,h) u h) at natural bracket scale: residual directions
    // weaker than closure_tol are treated as noise by the rank truncation
    std::vector<AlgebraElement> ext = out.basis.elements;
    for (auto& br : brackets) ext.push_back(std::move(br));
    out.basis = basis_orthonormalize(ext, closure_tol);
  }
  return out;
}

SubalgebraSearchResult subalgebra_search(const ReducedSnapshotMatrix& Sg, double energy_fraction,
                                         double closure_tol) {
  if (Sg.columns.empty()) throw std::invalid_argument("subalgebra_search: empty snapshot matrix");
  if (!(energy_fraction > 0.0 && energy_fraction < 1.0))
    throw std::invalid_argument("subalgebra_search: energy fraction must be in (0,1)");
  const Matrix stacked = Sg.stacked();
  Eigen::BDCSVD<Matrix> svd(stacked, Eigen::ComputeThinU);
  const Vector sv = svd.singularValues();
  const double total = sv.sum();

  SubalgebraSearchResult res;
  res.singular_values = sv;
  int k = 0;
  double acc = 0.0;
  if (total > 0.0) {
    while (k < sv.size() && acc <= energy_fraction * total) {
      acc += sv(k);
      ++k;
    }
  }
  res.kept_singular = k;
  res.captured_energy = total > 0.0 ? acc / total : 1.0;

  std::vector<AlgebraElement> kept;
  for (int i = 0; i < k; ++i) kept.push_back(Sg.basis.combine(svd.matrixU().col(i)));
  AlgebraBasis seed;
  seed.elements = std::move(kept);
  res.subalgebra = bracket_closure(seed, closure_tol);
  res.subalgebra.parent_dim = Sg.basis.size();
  LibraryMatch match = match_subalgebra_library(res.subalgebra.basis);
  res.library_match = match.name;
  res.match_defect = match.defect;
  if (!match.name.empty()) {
    // verify the named algebra explains the data, then adopt its canonical
    // basis in place of the noisy estimate
    Matrix q(Sg.basis.size(), match.basis.size());
    for (int j = 0; j < match.basis.size(); ++j)
      q.col(j) = Sg.basis.coefficients_of(match.basis.elements[j]);
    const double total_sq = stacked.squaredNorm();
    const double explained_sq = (q.transpose() * stacked).squaredNorm();
    if (total_sq > 0.0 && std::sqrt(explained_sq / total_sq) >= energy_fraction) {
      res.subalgebra.basis = match.basis;
      res.subalgebra.closure_residual = closure_residual_of(res.subalgebra.basis, nullptr);
      res.snapped = true;
    }
  }
  return res;
}

}  // namespace morlie
