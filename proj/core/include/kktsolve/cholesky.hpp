#pragma once

#include <memory>
#include <optional>
#include <variant>

#include "kktsolve/counter.hpp"
#include "kktsolve/lu.hpp"
#include "kktsolve/sparse.hpp"

namespace kktsolve {

/// One-time analysis of a symmetric pattern: fill-reducing permutation,
/// elimination tree, column counts and the exact pattern of L.
struct SymbolicChol {
  Index n = 0;
  Permutation perm;
  /// etree[j] = parent of column j, -1 for roots.
  std::vector<Index> etree;
  /// Nonzeros per column of L, diagonal included.
  std::vector<Index> col_counts;
  /// Lower-triangular CSR pattern of L in permuted indexing.
  PatternPtr L_pattern;
  /// Pattern the analysis was computed from.
  PatternPtr input_pattern;

  // Column storage of L: column j occupies [colptr[j], colptr[j+1]) with the
  // diagonal first and rows ascending after it.
  std::vector<Index> colptr;
  std::vector<Index> rowidx;
  // Row k of L (strictly lower part) as ascending columns with the storage
  // slot of each L(k, j).
  std::vector<Index> row_ptr;
  std::vector<Index> row_col;
  std::vector<Index> row_slot;
  // Scatter plan of the input: permuted row k takes input value src at column.
  std::vector<Index> scatter_ptr;
  std::vector<Index> scatter_col;
  std::vector<Index> scatter_src;
};

/// Reported by a numeric factorization whose pivot is not positive.
struct NotSpd {
  /// Column in permuted order where the pivot failed.
  Index column = -1;
  /// Original index of that column.
  Index original_column = -1;
  double pivot = 0.0;
};

class CholFactors;
std::variant<CholFactors, NotSpd> chol_factorize(std::shared_ptr<const SymbolicChol> symbolic, const CsMatrix& a);

/// Numeric Cholesky values on a frozen SymbolicChol.
class CholFactors {
 public:
  const SymbolicChol& symbolic() const noexcept { return *symbolic_; }
  const std::shared_ptr<const SymbolicChol>& symbolic_ptr() const noexcept { return symbolic_; }
  Index size() const noexcept { return symbolic_->n; }
  double min_pivot() const noexcept { return min_pivot_; }
  std::uint64_t triangular_solve_count() const noexcept { return solves_.load(); }

  /// L in permuted indexing as a general CSR matrix on L_pattern.
  CsMatrix lower() const;
  std::span<const double> values() const noexcept { return lx_; }

  /// Recomputes values for a new matrix on the same analysis without
  /// allocating. On failure the factor values are unspecified.
  std::optional<NotSpd> refactorize(const CsMatrix& a);

  /// Solves A x = b. Counts one triangular-solve unit (L then L^T).
  void solve(std::span<const double> b, std::span<double> x) const;
  Vector solve(std::span<const double> b) const;

 private:
  friend std::variant<CholFactors, NotSpd> chol_factorize(std::shared_ptr<const SymbolicChol> symbolic,
                                                          const CsMatrix& a);
  explicit CholFactors(std::shared_ptr<const SymbolicChol> symbolic);

  std::shared_ptr<const SymbolicChol> symbolic_;
  Vector lx_;
  Vector work_;
  double min_pivot_ = 0.0;
  SolveCounter solves_;
};

/// Analyzes a square symmetric pattern (symmetric-lower, or general with only
/// the lower triangle read). `natural` skips the AMD permutation.
std::shared_ptr<const SymbolicChol> chol_analyze(const CsMatrix& a_pattern,
                                                 ColumnOrdering ordering = ColumnOrdering::amd);
/// Analysis with a caller-supplied symmetric permutation (perm[new] = old).
std::shared_ptr<const SymbolicChol> chol_analyze(const CsMatrix& a_pattern, Permutation perm);

/// Up-looking numeric factorization on the frozen pattern. Values of `a` are
/// read from its lower triangle; its pattern must be contained in the
/// analyzed one (PatternError otherwise).
std::variant<CholFactors, NotSpd> chol_factorize(std::shared_ptr<const SymbolicChol> symbolic, const CsMatrix& a);

Vector chol_solve(const CholFactors& f, std::span<const double> b);

}  // namespace kktsolve
