#include "kktsolve/lu.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "kktsolve/error.hpp"
#include "kktsolve/ordering.hpp"

namespace kktsolve {

namespace {

std::size_t sz(Index i) { return static_cast<std::size_t>(i); }

struct ColumnForm {
  std::vector<Index> colptr;
  std::vector<Index> row;
  std::vector<Index> src;
};

// Column-oriented view of the logical matrix. src[s] is the CSR value index
// feeding CSC slot s; symmetric-lower off-diagonals feed two slots.
ColumnForm column_form(const CsMatrix& a) {
  const Index n = a.cols();
  const auto rp = a.row_ptr();
  const auto ci = a.col_idx();
  const bool sym = a.is_symmetric_lower();
  ColumnForm f;
  f.colptr.assign(sz(n) + 1, 0);
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index p = rp[sz(i)]; p < rp[sz(i) + 1]; ++p) {
      ++f.colptr[sz(ci[sz(p)]) + 1];
      if (sym && ci[sz(p)] != i) ++f.colptr[sz(i) + 1];
    }
  }
  for (Index j = 0; j < n; ++j) f.colptr[sz(j) + 1] += f.colptr[sz(j)];
  f.row.resize(sz(f.colptr.back()));
  f.src.resize(sz(f.colptr.back()));
  std::vector<Index> next(f.colptr.begin(), f.colptr.end() - 1);
  // Row-ascending traversal yields sorted rows per column, except that the
  // mirrored upper entries of column i (rows > i) arrive after the lower ones.
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index p = rp[sz(i)]; p < rp[sz(i) + 1]; ++p) {
      const Index j = ci[sz(p)];
      Index s = next[sz(j)]++;
      f.row[sz(s)] = i;
      f.src[sz(s)] = p;
      if (sym && j != i) {
        s = next[sz(i)]++;
        f.row[sz(s)] = j;
        f.src[sz(s)] = p;
      }
    }
  }
  return f;
}

}  // namespace

CsMatrix LuFactors::lower() const {
  Triplets t(n_, n_);
  for (Index j = 0; j < n_; ++j) {
    t.add(j, j, 1.0);
    for (Index p = l_colptr_[sz(j)]; p < l_colptr_[sz(j) + 1]; ++p) t.add(l_row_[sz(p)], j, l_val_[sz(p)]);
  }
  return from_triplets(t);
}

CsMatrix LuFactors::upper() const {
  Triplets t(n_, n_);
  for (Index k = 0; k < n_; ++k) {
    t.add(k, k, u_diag_[sz(k)]);
    for (Index p = u_colptr_[sz(k)]; p < u_colptr_[sz(k) + 1]; ++p) t.add(u_row_[sz(p)], k, u_val_[sz(p)]);
  }
  return from_triplets(t);
}

std::pair<LuFactors, LuDiagnostics> lu_factorize(const CsMatrix& a, const LuOptions& options) {
  if (!a.is_square()) throw DimensionError("lu_factorize: matrix must be square");
  if (!(options.pivot_tol > 0.0 && options.pivot_tol <= 1.0)) {
    throw ConfigError("lu_factorize: pivot_tol must lie in (0, 1]");
  }
  const Index n = a.rows();

  LuFactors f;
  f.n_ = n;
  f.pivot_tol_ = options.pivot_tol;
  f.symmetry_ = a.symmetry();
  f.a_pattern_ = a.pattern_ptr();
  {
    ColumnForm cf = column_form(a);
    f.a_colptr_ = std::move(cf.colptr);
    f.a_row_ = std::move(cf.row);
    f.a_src_ = std::move(cf.src);
  }
  f.col_perm_ = options.ordering == ColumnOrdering::amd ? amd_order(a) : Permutation::identity(n);
  const auto q = f.col_perm_.perm();
  const auto av = a.values();

  f.pinv_.assign(sz(n), -1);
  f.l_colptr_.assign(sz(n) + 1, 0);
  f.u_colptr_.assign(sz(n) + 1, 0);
  f.u_diag_.assign(sz(n), 0.0);

  Vector x(sz(n), 0.0);
  std::vector<Index> visited(sz(n), -1);
  std::vector<Index> reach;
  std::vector<Index> stack;
  std::vector<std::pair<Index, Index>> upart;
  std::vector<Index> candidates;

  double max_a = 0.0;
  for (double v : av) max_a = std::max(max_a, std::abs(v));
  double max_u = 0.0;

  for (Index k = 0; k < n; ++k) {
    const Index col = q[sz(k)];
    const Index abegin = f.a_colptr_[sz(col)];
    const Index aend = f.a_colptr_[sz(col) + 1];

    // Structural reach of A(:, col) in the graph of the computed L columns.
    reach.clear();
    for (Index s = abegin; s < aend; ++s) {
      const Index r0 = f.a_row_[sz(s)];
      if (visited[sz(r0)] == k) continue;
      visited[sz(r0)] = k;
      stack.push_back(r0);
      while (!stack.empty()) {
        const Index r = stack.back();
        stack.pop_back();
        reach.push_back(r);
        const Index j = f.pinv_[sz(r)];
        if (j < 0) continue;
        for (Index p = f.l_colptr_[sz(j)]; p < f.l_colptr_[sz(j) + 1]; ++p) {
          const Index c = f.l_row_[sz(p)];
          if (visited[sz(c)] != k) {
            visited[sz(c)] = k;
            stack.push_back(c);
          }
        }
      }
    }

    for (Index r : reach) x[sz(r)] = 0.0;
    for (Index s = abegin; s < aend; ++s) x[sz(f.a_row_[sz(s)])] = av[sz(f.a_src_[sz(s)])];

    // Sparse triangular solve in ascending pivot order; lu_refactorize
    // replays exactly this sequence of operations.
    upart.clear();
    candidates.clear();
    for (Index r : reach) {
      if (f.pinv_[sz(r)] >= 0) {
        upart.emplace_back(f.pinv_[sz(r)], r);
      } else {
        candidates.push_back(r);
      }
    }
    std::sort(upart.begin(), upart.end());
    std::sort(candidates.begin(), candidates.end());
    for (const auto& [j, r] : upart) {
      const double xj = x[sz(r)];
      for (Index p = f.l_colptr_[sz(j)]; p < f.l_colptr_[sz(j) + 1]; ++p) {
        x[sz(f.l_row_[sz(p)])] -= f.l_val_[sz(p)] * xj;
      }
    }

    if (candidates.empty()) {
      throw SingularMatrixError("lu_factorize: structurally singular at column " + std::to_string(col),
                                static_cast<long>(col), true);
    }
    Index ipiv = -1;
    double colmax = -1.0;
    for (Index r : candidates) {
      const double mag = std::abs(x[sz(r)]);
      if (mag > colmax) {
        colmax = mag;
        ipiv = r;
      }
    }
    if (!(colmax > 0.0)) {
      throw SingularMatrixError("lu_factorize: zero pivot at column " + std::to_string(col),
                                static_cast<long>(col), false);
    }
    if (f.pinv_[sz(col)] < 0 && visited[sz(col)] == k && std::abs(x[sz(col)]) >= options.pivot_tol * colmax) {
      ipiv = col;
    }

    const double pivot = x[sz(ipiv)];
    f.pinv_[sz(ipiv)] = k;
    f.u_diag_[sz(k)] = pivot;
    max_u = std::max(max_u, std::abs(pivot));
    for (const auto& [j, r] : upart) {
      f.u_row_.push_back(j);
      f.u_val_.push_back(x[sz(r)]);
      max_u = std::max(max_u, std::abs(x[sz(r)]));
    }
    f.u_colptr_[sz(k) + 1] = static_cast<Index>(f.u_row_.size());
    for (Index r : candidates) {
      if (r == ipiv) continue;
      f.l_row_.push_back(r);
      f.l_val_.push_back(x[sz(r)] / pivot);
    }
    f.l_colptr_[sz(k) + 1] = static_cast<Index>(f.l_row_.size());
  }

  // Rewrite L row indices in pivot order and sort each column. The order
  // within a column does not affect refactorization arithmetic: each row
  // receives at most one update per column.
  for (Index j = 0; j < n; ++j) {
    const Index b = f.l_colptr_[sz(j)];
    const Index e = f.l_colptr_[sz(j) + 1];
    std::vector<std::pair<Index, double>> col;
    col.reserve(sz(e - b));
    for (Index p = b; p < e; ++p) col.emplace_back(f.pinv_[sz(f.l_row_[sz(p)])], f.l_val_[sz(p)]);
    std::sort(col.begin(), col.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
    for (Index p = b; p < e; ++p) {
      f.l_row_[sz(p)] = col[sz(p - b)].first;
      f.l_val_[sz(p)] = col[sz(p - b)].second;
    }
  }
  std::vector<Index> rperm(sz(n));
  for (Index r = 0; r < n; ++r) rperm[sz(f.pinv_[sz(r)])] = r;
  f.row_perm_ = Permutation(std::move(rperm));

  LuDiagnostics d;
  d.max_abs_pivot = 0.0;
  d.min_abs_pivot = n > 0 ? std::abs(f.u_diag_[0]) : 0.0;
  for (double u : f.u_diag_) {
    d.max_abs_pivot = std::max(d.max_abs_pivot, std::abs(u));
    d.min_abs_pivot = std::min(d.min_abs_pivot, std::abs(u));
  }
  d.growth_estimate = max_a > 0.0 ? max_u / max_a : 0.0;
  return {std::move(f), d};
}

LuDiagnostics lu_refactorize(LuFactors& f, const CsMatrix& a_new) {
  const bool same = a_new.pattern_ptr() == f.a_pattern_ || a_new.pattern() == *f.a_pattern_;
  if (!same || a_new.symmetry() != f.symmetry_) {
    throw PatternError("lu_refactorize: matrix pattern differs from the factorized pattern");
  }
  const Index n = f.n_;
  const auto q = f.col_perm_.perm();
  const auto av = a_new.values();

  LuDiagnostics d;
  d.patch_threshold = 1e-12 * inf_norm(a_new);
  double max_a = 0.0;
  for (double v : av) max_a = std::max(max_a, std::abs(v));
  double max_u = 0.0;
  d.max_abs_pivot = 0.0;
  d.min_abs_pivot = std::numeric_limits<double>::infinity();

  Vector x(sz(n), 0.0);
  for (Index k = 0; k < n; ++k) {
    const Index col = q[sz(k)];
    for (Index s = f.a_colptr_[sz(col)]; s < f.a_colptr_[sz(col) + 1]; ++s) {
      x[sz(f.pinv_[sz(f.a_row_[sz(s)])])] = av[sz(f.a_src_[sz(s)])];
    }
    const Index ub = f.u_colptr_[sz(k)];
    const Index ue = f.u_colptr_[sz(k) + 1];
    for (Index idx = ub; idx < ue; ++idx) {
      const Index j = f.u_row_[sz(idx)];
      const double xj = x[sz(j)];
      f.u_val_[sz(idx)] = xj;
      max_u = std::max(max_u, std::abs(xj));
      for (Index p = f.l_colptr_[sz(j)]; p < f.l_colptr_[sz(j) + 1]; ++p) {
        x[sz(f.l_row_[sz(p)])] -= f.l_val_[sz(p)] * xj;
      }
    }
    double pivot = x[sz(k)];
    if (!(std::abs(pivot) >= d.patch_threshold) || pivot == 0.0) {
      pivot = pivot < 0.0 ? -d.patch_threshold : d.patch_threshold;
      if (pivot == 0.0) pivot = std::numeric_limits<double>::min();
      ++d.zero_pivots_patched;
    }
    f.u_diag_[sz(k)] = pivot;
    max_u = std::max(max_u, std::abs(pivot));
    d.max_abs_pivot = std::max(d.max_abs_pivot, std::abs(pivot));
    d.min_abs_pivot = std::min(d.min_abs_pivot, std::abs(pivot));
    for (Index p = f.l_colptr_[sz(k)]; p < f.l_colptr_[sz(k) + 1]; ++p) {
      f.l_val_[sz(p)] = x[sz(f.l_row_[sz(p)])] / pivot;
    }
    for (Index idx = ub; idx < ue; ++idx) x[sz(f.u_row_[sz(idx)])] = 0.0;
    x[sz(k)] = 0.0;
    for (Index p = f.l_colptr_[sz(k)]; p < f.l_colptr_[sz(k) + 1]; ++p) x[sz(f.l_row_[sz(p)])] = 0.0;
  }
  if (n == 0) d.min_abs_pivot = 0.0;
  d.growth_estimate = max_a > 0.0 ? max_u / max_a : 0.0;
  f.from_refactorization_ = true;
  return d;
}

void lu_solve(const LuFactors& f, std::span<const double> b, std::span<double> x) {
  const Index n = f.n_;
  if (static_cast<Index>(b.size()) != n || static_cast<Index>(x.size()) != n) {
    throw DimensionError("lu_solve: vector length does not match factor dimension");
  }
  Vector y(sz(n));
  for (Index r = 0; r < n; ++r) y[sz(f.pinv_[sz(r)])] = b[sz(r)];
  for (Index j = 0; j < n; ++j) {
    const double yj = y[sz(j)];
    if (yj == 0.0) continue;
    for (Index p = f.l_colptr_[sz(j)]; p < f.l_colptr_[sz(j) + 1]; ++p) y[sz(f.l_row_[sz(p)])] -= f.l_val_[sz(p)] * yj;
  }
  for (Index k = n - 1; k >= 0; --k) {
    y[sz(k)] /= f.u_diag_[sz(k)];
    const double yk = y[sz(k)];
    for (Index p = f.u_colptr_[sz(k)]; p < f.u_colptr_[sz(k) + 1]; ++p) y[sz(f.u_row_[sz(p)])] -= f.u_val_[sz(p)] * yk;
  }
  const auto q = f.col_perm_.perm();
  for (Index k = 0; k < n; ++k) x[sz(q[sz(k)])] = y[sz(k)];
  f.solves_.increment();
}

Vector lu_solve(const LuFactors& f, std::span<const double> b) {
  Vector x(sz(f.size()));
  lu_solve(f, b, x);
  return x;
}

}  // namespace kktsolve
