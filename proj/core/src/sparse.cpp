#include "kktsolve/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "kktsolve/error.hpp"

namespace kktsolve {

namespace {

std::size_t sz(Index i) { return static_cast<std::size_t>(i); }

void require(bool cond, const char* what) {
  if (!cond) throw DimensionError(what);
}

}  // namespace

// ---------------------------------------------------------------------------
// SparsityPattern

SparsityPattern::SparsityPattern(Index n_rows, Index n_cols, std::vector<Index> row_ptr,
                                 std::vector<Index> col_idx)
    : n_rows_(n_rows), n_cols_(n_cols), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)) {
  if (n_rows_ < 0 || n_cols_ < 0) throw DimensionError("negative matrix dimension");
  if (row_ptr_.size() != sz(n_rows_) + 1 || row_ptr_.front() != 0 ||
      row_ptr_.back() != static_cast<Index>(col_idx_.size())) {
    throw PatternError("row_ptr inconsistent with dimensions or nnz");
  }
  for (Index i = 0; i < n_rows_; ++i) {
    const Index begin = row_ptr_[sz(i)];
    const Index end = row_ptr_[sz(i) + 1];
    if (end < begin) throw PatternError("row_ptr must be nondecreasing");
    for (Index p = begin; p < end; ++p) {
      const Index c = col_idx_[sz(p)];
      if (c < 0 || c >= n_cols_) throw IndexError("column index out of range in row " + std::to_string(i));
      if (p > begin && c <= col_idx_[sz(p) - 1]) {
        throw PatternError("column indices must be strictly increasing in row " + std::to_string(i));
      }
    }
  }
}

Index SparsityPattern::find(Index row, Index col) const {
  if (row < 0 || row >= n_rows_) return -1;
  const auto begin = col_idx_.begin() + row_ptr_[sz(row)];
  const auto end = col_idx_.begin() + row_ptr_[sz(row) + 1];
  const auto it = std::lower_bound(begin, end, col);
  if (it == end || *it != col) return -1;
  return static_cast<Index>(it - col_idx_.begin());
}

// ---------------------------------------------------------------------------
// CsMatrix

CsMatrix::CsMatrix()
    : pattern_(std::make_shared<const SparsityPattern>(0, 0, std::vector<Index>{0}, std::vector<Index>{})) {}

CsMatrix::CsMatrix(PatternPtr pattern, Vector values, Symmetry symmetry)
    : pattern_(std::move(pattern)), values_(std::move(values)), symmetry_(symmetry) {
  if (!pattern_) throw PatternError("null sparsity pattern");
  if (static_cast<Index>(values_.size()) != pattern_->nnz()) {
    throw DimensionError("value count does not match pattern nnz");
  }
  if (symmetry_ == Symmetry::symmetric_lower) {
    if (pattern_->rows() != pattern_->cols()) throw DimensionError("symmetric matrix must be square");
    const auto rp = pattern_->row_ptr();
    const auto ci = pattern_->col_idx();
    for (Index i = 0; i < pattern_->rows(); ++i) {
      if (rp[sz(i) + 1] > rp[sz(i)] && ci[sz(rp[sz(i) + 1]) - 1] > i) {
        throw PatternError("symmetric-lower storage holds an upper-triangle entry");
      }
    }
  }
}

CsMatrix CsMatrix::identity(Index n) {
  std::vector<Index> rp(sz(n) + 1);
  std::vector<Index> ci(sz(n));
  std::iota(rp.begin(), rp.end(), Index{0});
  std::iota(ci.begin(), ci.end(), Index{0});
  return CsMatrix(std::make_shared<const SparsityPattern>(n, n, std::move(rp), std::move(ci)),
                  Vector(sz(n), 1.0));
}

void CsMatrix::set_values(Vector values) {
  if (values.size() != values_.size()) throw DimensionError("value count does not match pattern nnz");
  values_ = std::move(values);
}

CsMatrix CsMatrix::with_values(Vector values) const {
  return CsMatrix(pattern_, std::move(values), symmetry_);
}

bool CsMatrix::same_pattern(const CsMatrix& other) const {
  return pattern_ == other.pattern_ || *pattern_ == *other.pattern_;
}

double CsMatrix::at(Index row, Index col) const {
  if (row < 0 || row >= rows() || col < 0 || col >= cols()) throw IndexError("entry out of range");
  if (symmetry_ == Symmetry::symmetric_lower && col > row) std::swap(row, col);
  const Index p = pattern_->find(row, col);
  return p < 0 ? 0.0 : values_[sz(p)];
}

std::vector<double> CsMatrix::to_dense() const {
  const Index n = rows();
  const Index m = cols();
  std::vector<double> dense(sz(n) * sz(m), 0.0);
  const auto rp = row_ptr();
  const auto ci = col_idx();
  for (Index i = 0; i < n; ++i) {
    for (Index p = rp[sz(i)]; p < rp[sz(i) + 1]; ++p) {
      const Index j = ci[sz(p)];
      dense[sz(i) * sz(m) + sz(j)] += values_[sz(p)];
      if (symmetry_ == Symmetry::symmetric_lower && i != j) dense[sz(j) * sz(m) + sz(i)] += values_[sz(p)];
    }
  }
  return dense;
}

// ---------------------------------------------------------------------------
// Construction

CsMatrix from_triplets(const Triplets& t, Symmetry symmetry) {
  if (t.n_rows < 0 || t.n_cols < 0) throw DimensionError("negative matrix dimension");
  if (symmetry == Symmetry::symmetric_lower && t.n_rows != t.n_cols) {
    throw DimensionError("symmetric matrix must be square");
  }
  struct Entry {
    Index row;
    Index col;
    double value;
  };
  std::vector<Entry> entries;
  entries.reserve(t.entries.size());
  for (const auto& e : t.entries) {
    if (e.row < 0 || e.row >= t.n_rows || e.col < 0 || e.col >= t.n_cols) {
      throw IndexError("triplet (" + std::to_string(e.row) + ", " + std::to_string(e.col) +
                       ") out of range for " + std::to_string(t.n_rows) + "x" + std::to_string(t.n_cols));
    }
    Index r = e.row;
    Index c = e.col;
    if (symmetry == Symmetry::symmetric_lower && c > r) std::swap(r, c);
    entries.push_back({r, c, e.value});
  }
  // Stable sort keeps duplicate summation in input order.
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  std::vector<Index> rp(sz(t.n_rows) + 1, 0);
  std::vector<Index> ci;
  Vector vals;
  ci.reserve(entries.size());
  vals.reserve(entries.size());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& e = entries[k];
    if (k > 0 && entries[k - 1].row == e.row && entries[k - 1].col == e.col) {
      vals.back() += e.value;
      continue;
    }
    ci.push_back(e.col);
    vals.push_back(e.value);
    ++rp[sz(e.row) + 1];
  }
  for (Index i = 0; i < t.n_rows; ++i) rp[sz(i) + 1] += rp[sz(i)];
  return CsMatrix(std::make_shared<const SparsityPattern>(t.n_rows, t.n_cols, std::move(rp), std::move(ci)),
                  std::move(vals), symmetry);
}

CsMatrix from_dense(Index n_rows, Index n_cols, std::span<const double> dense, Symmetry symmetry) {
  require(dense.size() == sz(n_rows) * sz(n_cols), "dense array size does not match dimensions");
  Triplets t(n_rows, n_cols);
  for (Index i = 0; i < n_rows; ++i) {
    const Index jend = symmetry == Symmetry::symmetric_lower ? i + 1 : n_cols;
    for (Index j = 0; j < jend; ++j) {
      const double v = dense[sz(i) * sz(n_cols) + sz(j)];
      if (v != 0.0) t.add(i, j, v);
    }
  }
  return from_triplets(t, symmetry);
}

// ---------------------------------------------------------------------------
// Products

void spmv(const CsMatrix& a, std::span<const double> x, std::span<double> y, bool transpose) {
  const bool sym = a.is_symmetric_lower();
  const Index in_dim = (transpose && !sym) ? a.rows() : a.cols();
  const Index out_dim = (transpose && !sym) ? a.cols() : a.rows();
  require(static_cast<Index>(x.size()) == in_dim, "spmv: x has wrong length");
  require(static_cast<Index>(y.size()) == out_dim, "spmv: y has wrong length");
  const auto rp = a.row_ptr();
  const auto ci = a.col_idx();
  const auto v = a.values();
  std::fill(y.begin(), y.end(), 0.0);
  if (sym) {
    for (Index i = 0; i < a.rows(); ++i) {
      double acc = 0.0;
      const double xi = x[sz(i)];
      for (Index p = rp[sz(i)]; p < rp[sz(i) + 1]; ++p) {
        const Index j = ci[sz(p)];
        acc += v[sz(p)] * x[sz(j)];
        if (j != i) y[sz(j)] += v[sz(p)] * xi;
      }
      y[sz(i)] += acc;
    }
  } else if (!transpose) {
    for (Index i = 0; i < a.rows(); ++i) {
      double acc = 0.0;
      for (Index p = rp[sz(i)]; p < rp[sz(i) + 1]; ++p) acc += v[sz(p)] * x[sz(ci[sz(p)])];
      y[sz(i)] = acc;
    }
  } else {
    for (Index i = 0; i < a.rows(); ++i) {
      const double xi = x[sz(i)];
      for (Index p = rp[sz(i)]; p < rp[sz(i) + 1]; ++p) y[sz(ci[sz(p)])] += v[sz(p)] * xi;
    }
  }
}

Vector spmv(const CsMatrix& a, std::span<const double> x, bool transpose) {
  const bool t = transpose && !a.is_symmetric_lower();
  Vector y(sz(t ? a.cols() : a.rows()));
  spmv(a, x, y, transpose);
  return y;
}

Vector residual(const CsMatrix& a, std::span<const double> x, std::span<const double> b) {
  require(static_cast<Index>(b.size()) == a.rows(), "residual: b has wrong length");
  Vector r = spmv(a, x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
  return r;
}

CsMatrix transpose(const CsMatrix& a) {
  if (a.is_symmetric_lower()) return a;
  const Index n = a.rows();
  const Index m = a.cols();
  const auto rp = a.row_ptr();
  const auto ci = a.col_idx();
  const auto v = a.values();
  std::vector<Index> tp(sz(m) + 1, 0);
  for (Index p = 0; p < a.nnz(); ++p) ++tp[sz(ci[sz(p)]) + 1];
  for (Index j = 0; j < m; ++j) tp[sz(j) + 1] += tp[sz(j)];
  std::vector<Index> next(tp.begin(), tp.end() - 1);
  std::vector<Index> ti(sz(a.nnz()));
  Vector tv(sz(a.nnz()));
  for (Index i = 0; i < n; ++i) {
    for (Index p = rp[sz(i)]; p < rp[sz(i) + 1]; ++p) {
      const Index q = next[sz(ci[sz(p)])]++;
      ti[sz(q)] = i;
      tv[sz(q)] = v[sz(p)];
    }
  }
  return CsMatrix(std::make_shared<const SparsityPattern>(m, n, std::move(tp), std::move(ti)), std::move(tv));
}

CsMatrix expand_symmetric(const CsMatrix& a) {
  if (!a.is_symmetric_lower()) return a;
  Triplets t(a.rows(), a.cols());
  const auto rp = a.row_ptr();
  const auto ci = a.col_idx();
  const auto v = a.values();
  t.entries.reserve(sz(a.nnz()) * 2);
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index p = rp[sz(i)]; p < rp[sz(i) + 1]; ++p) {
      t.add(i, ci[sz(p)], v[sz(p)]);
      if (ci[sz(p)] != i) t.add(ci[sz(p)], i, v[sz(p)]);
    }
  }
  return from_triplets(t);
}

CsMatrix lower_triangle(const CsMatrix& a) {
  require(a.is_square(), "lower_triangle: matrix must be square");
  if (a.is_symmetric_lower()) return a;
  Triplets t(a.rows(), a.cols());
  const auto rp = a.row_ptr();
  const auto ci = a.col_idx();
  const auto v = a.values();
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index p = rp[sz(i)]; p < rp[sz(i) + 1]; ++p) {
      if (ci[sz(p)] <= i) t.add(i, ci[sz(p)], v[sz(p)]);
    }
  }
  return from_triplets(t, Symmetry::symmetric_lower);
}

PatternPtr spgemm_symbolic(const CsMatrix& a_in, const CsMatrix& b_in) {
  require(a_in.cols() == b_in.rows(), "spgemm: inner dimensions differ");
  const CsMatrix a = expand_symmetric(a_in);
  const CsMatrix b = expand_symmetric(b_in);
  const auto arp = a.row_ptr();
  const auto aci = a.col_idx();
  const auto brp = b.row_ptr();
  const auto bci = b.col_idx();
  std::vector<Index> mark(sz(b.cols()), -1);
  std::vector<Index> rp(sz(a.rows()) + 1, 0);
  std::vector<Index> ci;
  std::vector<Index> row_cols;
  for (Index i = 0; i < a.rows(); ++i) {
    row_cols.clear();
    for (Index p = arp[sz(i)]; p < arp[sz(i) + 1]; ++p) {
      const Index k = aci[sz(p)];
      for (Index q = brp[sz(k)]; q < brp[sz(k) + 1]; ++q) {
        const Index j = bci[sz(q)];
        if (mark[sz(j)] != i) {
          mark[sz(j)] = i;
          row_cols.push_back(j);
        }
      }
    }
    std::sort(row_cols.begin(), row_cols.end());
    ci.insert(ci.end(), row_cols.begin(), row_cols.end());
    rp[sz(i) + 1] = static_cast<Index>(ci.size());
  }
  return std::make_shared<const SparsityPattern>(a.rows(), b.cols(), std::move(rp), std::move(ci));
}

void spgemm_numeric(const CsMatrix& a_in, const CsMatrix& b_in, const SparsityPattern& pattern,
                    std::span<double> out) {
  require(a_in.cols() == b_in.rows(), "spgemm: inner dimensions differ");
  require(pattern.rows() == a_in.rows() && pattern.cols() == b_in.cols(), "spgemm: pattern shape mismatch");
  require(static_cast<Index>(out.size()) == pattern.nnz(), "spgemm: output size mismatch");
  const CsMatrix a = expand_symmetric(a_in);
  const CsMatrix b = expand_symmetric(b_in);
  const auto arp = a.row_ptr();
  const auto aci = a.col_idx();
  const auto av = a.values();
  const auto brp = b.row_ptr();
  const auto bci = b.col_idx();
  const auto bv = b.values();
  const auto prp = pattern.row_ptr();
  const auto pci = pattern.col_idx();
  std::vector<Index> pos(sz(b.cols()), -1);
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index p = prp[sz(i)]; p < prp[sz(i) + 1]; ++p) {
      pos[sz(pci[sz(p)])] = p;
      out[sz(p)] = 0.0;
    }
    for (Index p = arp[sz(i)]; p < arp[sz(i) + 1]; ++p) {
      const Index k = aci[sz(p)];
      const double aik = av[sz(p)];
      for (Index q = brp[sz(k)]; q < brp[sz(k) + 1]; ++q) {
        const Index slot = pos[sz(bci[sz(q)])];
        if (slot < 0) throw PatternError("spgemm: product entry missing from pattern");
        out[sz(slot)] += aik * bv[sz(q)];
      }
    }
    for (Index p = prp[sz(i)]; p < prp[sz(i) + 1]; ++p) pos[sz(pci[sz(p)])] = -1;
  }
}

CsMatrix spgemm(const CsMatrix& a, const CsMatrix& b) {
  PatternPtr pattern = spgemm_symbolic(a, b);
  Vector values(sz(pattern->nnz()));
  spgemm_numeric(a, b, *pattern, values);
  return CsMatrix(std::move(pattern), std::move(values));
}

double inf_norm(const CsMatrix& a) {
  const Vector rows = [&] {
    Vector r(sz(a.rows()), 0.0);
    const auto rp = a.row_ptr();
    const auto ci = a.col_idx();
    const auto v = a.values();
    for (Index i = 0; i < a.rows(); ++i) {
      for (Index p = rp[sz(i)]; p < rp[sz(i) + 1]; ++p) {
        r[sz(i)] += std::abs(v[sz(p)]);
        if (a.is_symmetric_lower() && ci[sz(p)] != i) r[sz(ci[sz(p)])] += std::abs(v[sz(p)]);
      }
    }
    return r;
  }();
  double norm = 0.0;
  for (double r : rows) norm = std::max(norm, r);
  return norm;
}

// ---------------------------------------------------------------------------
// Permutation

Permutation::Permutation(std::vector<Index> perm) : perm_(std::move(perm)), inv_(perm_.size(), -1) {
  const Index n = static_cast<Index>(perm_.size());
  for (Index i = 0; i < n; ++i) {
    const Index p = perm_[sz(i)];
    if (p < 0 || p >= n || inv_[sz(p)] != -1) throw ConfigError("permutation is not a bijection");
    inv_[sz(p)] = i;
  }
}

Permutation Permutation::identity(Index n) {
  std::vector<Index> p(sz(n));
  std::iota(p.begin(), p.end(), Index{0});
  return Permutation(std::move(p));
}

Permutation Permutation::inverse() const { return Permutation(inv_); }

Vector Permutation::apply(std::span<const double> x) const {
  require(x.size() == perm_.size(), "permutation length mismatch");
  Vector y(x.size());
  for (std::size_t i = 0; i < perm_.size(); ++i) y[i] = x[sz(perm_[i])];
  return y;
}

Vector Permutation::apply_inverse(std::span<const double> x) const {
  require(x.size() == perm_.size(), "permutation length mismatch");
  Vector y(x.size());
  for (std::size_t i = 0; i < perm_.size(); ++i) y[sz(perm_[i])] = x[i];
  return y;
}

CsMatrix permute_symmetric(const CsMatrix& a, const Permutation& p) {
  require(a.is_square(), "permute_symmetric: matrix must be square");
  require(p.size() == a.rows(), "permute_symmetric: permutation length mismatch");
  const auto inv = p.inv_perm();
  const auto rp = a.row_ptr();
  const auto ci = a.col_idx();
  const auto v = a.values();
  Triplets t(a.rows(), a.cols());
  t.entries.reserve(sz(a.nnz()));
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index q = rp[sz(i)]; q < rp[sz(i) + 1]; ++q) {
      t.add(inv[sz(i)], inv[sz(ci[sz(q)])], v[sz(q)]);
    }
  }
  return from_triplets(t, a.symmetry());
}

// ---------------------------------------------------------------------------
// Scaling

Vector row_inf_norms(const CsMatrix& a) {
  Vector r(sz(a.rows()), 0.0);
  const auto rp = a.row_ptr();
  const auto ci = a.col_idx();
  const auto v = a.values();
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index p = rp[sz(i)]; p < rp[sz(i) + 1]; ++p) {
      const double mag = std::abs(v[sz(p)]);
      r[sz(i)] = std::max(r[sz(i)], mag);
      if (a.is_symmetric_lower() && ci[sz(p)] != i) r[sz(ci[sz(p)])] = std::max(r[sz(ci[sz(p)])], mag);
    }
  }
  return r;
}

CsMatrix scale_symmetric(const CsMatrix& a, std::span<const double> d) {
  require(a.is_square() && static_cast<Index>(d.size()) == a.rows(), "scale_symmetric: size mismatch");
  Vector vals(a.values().begin(), a.values().end());
  const auto rp = a.row_ptr();
  const auto ci = a.col_idx();
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index p = rp[sz(i)]; p < rp[sz(i) + 1]; ++p) vals[sz(p)] *= d[sz(i)] * d[sz(ci[sz(p)])];
  }
  return a.with_values(std::move(vals));
}

RuizScaling ruiz_scale(const CsMatrix& k, int max_iters, double tol) {
  require(k.is_square(), "ruiz_scale: matrix must be square");
  if (max_iters < 0 || !(tol >= 0.0)) throw ConfigError("ruiz_scale: invalid iteration count or tolerance");
  RuizScaling s;
  s.d.assign(sz(k.rows()), 1.0);
  const auto rp = k.row_ptr();
  const auto ci = k.col_idx();
  const auto v = k.values();
  Vector norms(sz(k.rows()));
  for (;;) {
    std::fill(norms.begin(), norms.end(), 0.0);
    for (Index i = 0; i < k.rows(); ++i) {
      for (Index p = rp[sz(i)]; p < rp[sz(i) + 1]; ++p) {
        const Index j = ci[sz(p)];
        const double mag = std::abs(v[sz(p)]) * s.d[sz(i)] * s.d[sz(j)];
        norms[sz(i)] = std::max(norms[sz(i)], mag);
        if (k.is_symmetric_lower() && j != i) norms[sz(j)] = std::max(norms[sz(j)], mag);
      }
    }
    double worst = 0.0;
    for (Index i = 0; i < k.rows(); ++i) {
      if (norms[sz(i)] == 0.0) throw SingularMatrixError("ruiz_scale: row " + std::to_string(i) + " is all zero",
                                                         static_cast<long>(i), true);
      worst = std::max(worst, std::abs(norms[sz(i)] - 1.0));
    }
    if (worst <= tol) {
      s.converged = true;
      break;
    }
    if (s.iterations_used >= max_iters) break;
    for (Index i = 0; i < k.rows(); ++i) s.d[sz(i)] /= std::sqrt(norms[sz(i)]);
    ++s.iterations_used;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Dense helpers

double dot(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double norm2(std::span<const double> x) {
  // Scaled accumulation avoids overflow on badly scaled residuals.
  double scale = 0.0;
  double ssq = 1.0;
  for (double v : x) {
    if (v == 0.0) continue;
    const double a = std::abs(v);
    if (scale < a) {
      ssq = 1.0 + ssq * (scale / a) * (scale / a);
      scale = a;
    } else {
      ssq += (a / scale) * (a / scale);
    }
  }
  return scale * std::sqrt(ssq);
}

double norm_inf(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require(x.size() == y.size(), "axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace kktsolve
