#pragma once

#include "morlie/fitting.hpp"
#include "morlie/lie_core.hpp"

#include <string>

namespace morlie {

struct SubalgebraSearchResult {
  Subalgebra subalgebra;
  int kept_singular = 0;        // directions kept by the energy threshold
  double captured_energy = 1.0; // sum_{i<=k} sigma_i / sum sigma_i
  Vector singular_values;
  std::string library_match;    // named subalgebra of aff(3), or empty
  double match_defect = 1.0;    // raw 1 - cos(largest principal angle) vs the match
  bool snapped = false;         // basis replaced by the matched library basis
};

/// Alignment defect between the spans of two bases: 1 - cos of the largest
/// principal angle (0 for identical subspaces, 1 for orthogonal directions).
double subspace_alignment_defect(const AlgebraBasis& a, const AlgebraBasis& b);

struct LibraryMatch {
  std::string name;     // empty when nothing matches within match_tol
  double defect = 1.0;
  AlgebraBasis basis;   // canonical basis of the matched algebra
};

/// Name the span of a closed basis against known subalgebras of aff(3)
/// (so(3), translations, scalings+translations, se(3), sl(3)+translations,
/// aff(3)); clustered product algebras match factor-wise. The tolerance is
/// calibrated to identification noise: the true candidate sits orders of
/// magnitude below the alternatives.
LibraryMatch match_subalgebra_library(const AlgebraBasis& found, double match_tol = 5e-3);

/// Repeatedly extend a basis by pairwise brackets and re-orthonormalize until
/// the span is bracket-invariant within closure_tol (relative out-of-span
/// norm). Dimension never decreases; for parent dimension d the loop needs at
/// most d rounds.
Subalgebra bracket_closure(const AlgebraBasis& basis, double closure_tol = 1e-8,
                           int max_rounds = 16);

/// SVD of the stacked coefficient columns, keep the smallest leading set of
/// singular directions whose singular-value sum exceeds energy_fraction of the
/// total, then close under the bracket. When the closed span is recognized in
/// the library and the candidate verifiably explains the data (projected
/// column energy >= energy_fraction), the canonical library basis is returned
/// in place of the noisy estimate; the raw alignment defect is kept for
/// inspection.
SubalgebraSearchResult subalgebra_search(const ReducedSnapshotMatrix& Sg, double energy_fraction,
                                         double closure_tol = 1e-8);

}  // namespace morlie
