#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace kktsolve {

using Index = std::ptrdiff_t;
using Vector = std::vector<double>;

/// Storage convention of a CsMatrix.
///
/// `symmetric_lower` stores only entries with col <= row; every kernel treats
/// such a matrix as its full symmetric expansion.
enum class Symmetry { general, symmetric_lower };

struct Triplet {
  Index row;
  Index col;
  double value;
};

/// Coordinate-format assembly input. Duplicates are summed on conversion.
struct Triplets {
  Index n_rows = 0;
  Index n_cols = 0;
  std::vector<Triplet> entries;

  Triplets() = default;
  Triplets(Index rows, Index cols) : n_rows(rows), n_cols(cols) {}

  void add(Index row, Index col, double value) { entries.push_back({row, col, value}); }
};

/// Immutable CSR structure: row offsets and strictly increasing column indices
/// per row. Matrices that share a pattern share one instance of this class.
class SparsityPattern {
 public:
  SparsityPattern(Index n_rows, Index n_cols, std::vector<Index> row_ptr,
                  std::vector<Index> col_idx);

  Index rows() const noexcept { return n_rows_; }
  Index cols() const noexcept { return n_cols_; }
  Index nnz() const noexcept { return static_cast<Index>(col_idx_.size()); }
  std::span<const Index> row_ptr() const noexcept { return row_ptr_; }
  std::span<const Index> col_idx() const noexcept { return col_idx_; }

  /// Position of (row, col) in the value array, or -1 if not stored.
  Index find(Index row, Index col) const;

  bool operator==(const SparsityPattern& other) const = default;

 private:
  Index n_rows_;
  Index n_cols_;
  std::vector<Index> row_ptr_;
  std::vector<Index> col_idx_;
};

using PatternPtr = std::shared_ptr<const SparsityPattern>;

/// Compressed sparse row matrix with a frozen pattern.
///
/// Values may be replaced (whole or in place); the pattern never changes
/// after construction.
class CsMatrix {
 public:
  CsMatrix();
  CsMatrix(PatternPtr pattern, Vector values, Symmetry symmetry = Symmetry::general);

  static CsMatrix identity(Index n);

  Index rows() const noexcept { return pattern_->rows(); }
  Index cols() const noexcept { return pattern_->cols(); }
  Index nnz() const noexcept { return pattern_->nnz(); }
  bool is_square() const noexcept { return rows() == cols(); }
  Symmetry symmetry() const noexcept { return symmetry_; }
  bool is_symmetric_lower() const noexcept { return symmetry_ == Symmetry::symmetric_lower; }

  const SparsityPattern& pattern() const noexcept { return *pattern_; }
  const PatternPtr& pattern_ptr() const noexcept { return pattern_; }
  std::span<const Index> row_ptr() const noexcept { return pattern_->row_ptr(); }
  std::span<const Index> col_idx() const noexcept { return pattern_->col_idx(); }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  /// Replaces every value; size must equal nnz().
  void set_values(Vector values);

  /// A matrix sharing this pattern with different values.
  CsMatrix with_values(Vector values) const;

  /// True when both matrices have identical structure (pointer or content).
  bool same_pattern(const CsMatrix& other) const;

  /// Logical entry, expanding symmetric storage. O(log row length).
  double at(Index row, Index col) const;

  /// Row-major dense copy of the logical matrix.
  std::vector<double> to_dense() const;

 private:
  PatternPtr pattern_;
  Vector values_;
  Symmetry symmetry_ = Symmetry::general;
};

CsMatrix from_triplets(const Triplets& t, Symmetry symmetry = Symmetry::general);

/// Builds a matrix from a row-major dense array, dropping exact zeros.
/// With `symmetric_lower` only the lower triangle is read.
CsMatrix from_dense(Index n_rows, Index n_cols, std::span<const double> dense,
                    Symmetry symmetry = Symmetry::general);

/// y = A x, or y = A^T x when `transpose` is set.
Vector spmv(const CsMatrix& a, std::span<const double> x, bool transpose = false);
void spmv(const CsMatrix& a, std::span<const double> x, std::span<double> y,
          bool transpose = false);

/// r = b - A x.
Vector residual(const CsMatrix& a, std::span<const double> x, std::span<const double> b);

CsMatrix transpose(const CsMatrix& a);

/// General-storage copy holding both triangles of a symmetric-lower matrix.
CsMatrix expand_symmetric(const CsMatrix& a);

/// Lower triangle (col <= row) of a square matrix, tagged symmetric-lower.
CsMatrix lower_triangle(const CsMatrix& a);

/// Structural product pattern of A*B (symmetric inputs are expanded).
PatternPtr spgemm_symbolic(const CsMatrix& a, const CsMatrix& b);

/// Fills `out` (aligned with `pattern`) with the values of A*B. Entries of the
/// product are accumulated in ascending inner index.
void spgemm_numeric(const CsMatrix& a, const CsMatrix& b, const SparsityPattern& pattern,
                    std::span<double> out);

CsMatrix spgemm(const CsMatrix& a, const CsMatrix& b);

/// max_i sum_j |a_ij| over the logical matrix.
double inf_norm(const CsMatrix& a);

/// Bijection on [0, n). `perm()[new] = old`; applying it to a matrix yields
/// B(i, j) = A(perm[i], perm[j]).
class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<Index> perm);

  static Permutation identity(Index n);

  Index size() const noexcept { return static_cast<Index>(perm_.size()); }
  std::span<const Index> perm() const noexcept { return perm_; }
  std::span<const Index> inv_perm() const noexcept { return inv_; }
  Index operator[](Index i) const { return perm_[static_cast<std::size_t>(i)]; }

  Permutation inverse() const;

  /// y[i] = x[perm[i]]
  Vector apply(std::span<const double> x) const;
  /// y[perm[i]] = x[i]
  Vector apply_inverse(std::span<const double> x) const;

  bool operator==(const Permutation& other) const = default;

 private:
  std::vector<Index> perm_;
  std::vector<Index> inv_;
};

/// P A P^T. Symmetric-lower inputs stay symmetric-lower.
CsMatrix permute_symmetric(const CsMatrix& a, const Permutation& p);

/// Symmetric inf-norm equilibration state: D K D has unit row maxima.
struct RuizScaling {
  Vector d;
  int iterations_used = 0;
  bool converged = false;
};

/// Iterates d <- d / sqrt(row inf-norm of D K D). Converged once every
/// scaled row maximum lies within `tol` of one.
RuizScaling ruiz_scale(const CsMatrix& k, int max_iters = 2, double tol = 1e-2);

/// D A D for a diagonal D given by `d`.
CsMatrix scale_symmetric(const CsMatrix& a, std::span<const double> d);

/// Row inf-norms of the logical matrix.
Vector row_inf_norms(const CsMatrix& a);

// Dense vector helpers.
double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const double> x);
double norm_inf(std::span<const double> x);
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
bool all_finite(std::span<const double> x);

}  // namespace kktsolve
