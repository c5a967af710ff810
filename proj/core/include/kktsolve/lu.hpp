#pragma once

#include <cstdint>
#include <utility>

#include "kktsolve/counter.hpp"
#include "kktsolve/sparse.hpp"

namespace kktsolve {

enum class ColumnOrdering { amd, natural };

struct LuOptions {
  /// Threshold partial pivoting: a candidate is admissible when its magnitude
  /// is at least pivot_tol times the column maximum. The diagonal is preferred
  /// whenever admissible.
  double pivot_tol = 0.1;
  ColumnOrdering ordering = ColumnOrdering::amd;
};

/// Pivot health of the most recent (re)factorization.
struct LuDiagnostics {
  double max_abs_pivot = 0.0;
  double min_abs_pivot = 0.0;
  Index zero_pivots_patched = 0;
  /// max |U_ij| / max |A_ij|
  double growth_estimate = 0.0;
  /// Magnitude below which a refactorization pivot gets patched.
  double patch_threshold = 0.0;
};

/// P_r A P_c = L U with L unit lower triangular and U upper triangular,
/// both stored by column in pivot order. The patterns of L and U, the column
/// order and the row pivot sequence are fixed by lu_factorize and reused by
/// every lu_refactorize call.
class LuFactors {
 public:
  Index size() const noexcept { return n_; }
  const Permutation& row_perm() const noexcept { return row_perm_; }
  const Permutation& col_perm() const noexcept { return col_perm_; }
  double pivot_tol() const noexcept { return pivot_tol_; }
  bool from_refactorization() const noexcept { return from_refactorization_; }
  std::uint64_t triangular_solve_count() const noexcept { return solves_.load(); }

  /// Unit lower factor (diagonal included) as a general CSR matrix.
  CsMatrix lower() const;
  /// Upper factor (diagonal included) as a general CSR matrix.
  CsMatrix upper() const;

  Index nnz_lower() const noexcept { return static_cast<Index>(l_row_.size()) + n_; }
  Index nnz_upper() const noexcept { return static_cast<Index>(u_row_.size()) + n_; }

  /// Pattern of the matrix these factors were computed from.
  const PatternPtr& matrix_pattern() const noexcept { return a_pattern_; }

  /// Raw factor values in storage order, for bitwise comparisons.
  std::span<const double> lower_values() const noexcept { return l_val_; }
  std::span<const double> upper_values() const noexcept { return u_val_; }
  std::span<const double> upper_diagonal() const noexcept { return u_diag_; }

 private:
  friend std::pair<LuFactors, LuDiagnostics> lu_factorize(const CsMatrix& a, const LuOptions& options);
  friend LuDiagnostics lu_refactorize(LuFactors& factors, const CsMatrix& a_new);
  friend void lu_solve(const LuFactors& factors, std::span<const double> b, std::span<double> x);

  Index n_ = 0;
  double pivot_tol_ = 0.1;
  bool from_refactorization_ = false;
  Symmetry symmetry_ = Symmetry::general;
  PatternPtr a_pattern_;

  // A by column: a_src_ maps each CSC slot to its CSR value index.
  std::vector<Index> a_colptr_;
  std::vector<Index> a_row_;
  std::vector<Index> a_src_;

  Permutation row_perm_;
  Permutation col_perm_;
  // row -> pivot position
  std::vector<Index> pinv_;

  std::vector<Index> l_colptr_;
  std::vector<Index> l_row_;
  Vector l_val_;
  std::vector<Index> u_colptr_;
  std::vector<Index> u_row_;
  Vector u_val_;
  Vector u_diag_;

  SolveCounter solves_;
};

/// Full symbolic + numeric factorization with threshold partial pivoting
/// (left-looking, Gilbert-Peierls). Throws SingularMatrixError when a column
/// has no pivot candidate or only zero candidates.
std::pair<LuFactors, LuDiagnostics> lu_factorize(const CsMatrix& a, const LuOptions& options = {});

/// Numeric-only factorization of a matrix with the original pattern, reusing
/// the stored pivot sequence. Pivots below 1e-12 * ||A_new||_inf are replaced
/// by +/- that threshold and counted. Throws PatternError if the pattern differs.
LuDiagnostics lu_refactorize(LuFactors& factors, const CsMatrix& a_new);

/// Solves A x = b with the factors. Counts one triangular-solve unit.
Vector lu_solve(const LuFactors& factors, std::span<const double> b);
void lu_solve(const LuFactors& factors, std::span<const double> b, std::span<double> x);

}  // namespace kktsolve
