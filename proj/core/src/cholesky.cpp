#include "kktsolve/cholesky.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kktsolve/error.hpp"
#include "kktsolve/ordering.hpp"

namespace kktsolve {

namespace {

std::size_t sz(Index i) { return static_cast<std::size_t>(i); }

struct Scatter {
  std::vector<Index> ptr;
  std::vector<Index> col;
  std::vector<Index> src;
};

// Groups the lower-triangle entries of `a` by permuted row. With `check`,
// every target position must exist in the analyzed L pattern.
Scatter build_scatter(const SymbolicChol& s, const CsMatrix& a, bool check) {
  const auto inv = s.perm.inv_perm();
  const auto rp = a.row_ptr();
  const auto ci = a.col_idx();
  Scatter sc;
  sc.ptr.assign(sz(s.n) + 1, 0);
  std::vector<std::pair<Index, Index>> entries;  // (k, c) per value
  std::vector<Index> values;
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index p = rp[sz(i)]; p < rp[sz(i) + 1]; ++p) {
      const Index j = ci[sz(p)];
      if (j > i) continue;
      const Index pi = inv[sz(i)];
      const Index pj = inv[sz(j)];
      const Index k = std::max(pi, pj);
      const Index c = std::min(pi, pj);
      if (check && c != k) {
        const auto begin = s.row_col.begin() + s.row_ptr[sz(k)];
        const auto end = s.row_col.begin() + s.row_ptr[sz(k) + 1];
        if (!std::binary_search(begin, end, c)) {
          throw PatternError("chol_factorize: matrix entry outside the analyzed pattern");
        }
      }
      entries.emplace_back(k, c);
      values.push_back(p);
      ++sc.ptr[sz(k) + 1];
    }
  }
  for (Index k = 0; k < s.n; ++k) sc.ptr[sz(k) + 1] += sc.ptr[sz(k)];
  sc.col.resize(entries.size());
  sc.src.resize(entries.size());
  std::vector<Index> next(sc.ptr.begin(), sc.ptr.end() - 1);
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const Index slot = next[sz(entries[e].first)]++;
    sc.col[sz(slot)] = entries[e].second;
    sc.src[sz(slot)] = values[e];
  }
  return sc;
}

}  // namespace

std::shared_ptr<const SymbolicChol> chol_analyze(const CsMatrix& a, ColumnOrdering ordering) {
  if (!a.is_square()) throw DimensionError("chol_analyze: matrix must be square");
  return chol_analyze(a, ordering == ColumnOrdering::amd ? amd_order(a) : Permutation::identity(a.rows()));
}

std::shared_ptr<const SymbolicChol> chol_analyze(const CsMatrix& a, Permutation perm) {
  if (!a.is_square()) throw DimensionError("chol_analyze: matrix must be square");
  if (perm.size() != a.rows()) throw DimensionError("chol_analyze: permutation size differs from matrix");
  auto s = std::make_shared<SymbolicChol>();
  const Index n = a.rows();
  s->n = n;
  s->input_pattern = a.pattern_ptr();
  s->perm = std::move(perm);
  const auto inv = s->perm.inv_perm();

  // Strict upper part of P A P^T by column.
  std::vector<std::vector<Index>> upper(sz(n));
  {
    const auto rp = a.row_ptr();
    const auto ci = a.col_idx();
    for (Index i = 0; i < n; ++i) {
      for (Index p = rp[sz(i)]; p < rp[sz(i) + 1]; ++p) {
        const Index j = ci[sz(p)];
        if (j >= i) continue;
        const Index pi = inv[sz(i)];
        const Index pj = inv[sz(j)];
        upper[sz(std::max(pi, pj))].push_back(std::min(pi, pj));
      }
    }
  }

  // Elimination tree with path-compressed ancestors.
  s->etree.assign(sz(n), -1);
  std::vector<Index> ancestor(sz(n), -1);
  for (Index k = 0; k < n; ++k) {
    for (Index i : upper[sz(k)]) {
      while (i != -1 && i < k) {
        const Index next = ancestor[sz(i)];
        ancestor[sz(i)] = k;
        if (next == -1) s->etree[sz(i)] = k;
        i = next;
      }
    }
  }

  // Row patterns of L from the row subtrees of the etree.
  s->row_ptr.assign(sz(n) + 1, 0);
  std::vector<Index> mark(sz(n), -1);
  std::vector<Index> rowbuf;
  for (Index k = 0; k < n; ++k) {
    mark[sz(k)] = k;
    rowbuf.clear();
    for (Index i : upper[sz(k)]) {
      while (mark[sz(i)] != k) {
        rowbuf.push_back(i);
        mark[sz(i)] = k;
        i = s->etree[sz(i)];
      }
    }
    std::sort(rowbuf.begin(), rowbuf.end());
    s->row_col.insert(s->row_col.end(), rowbuf.begin(), rowbuf.end());
    s->row_ptr[sz(k) + 1] = static_cast<Index>(s->row_col.size());
  }

  s->col_counts.assign(sz(n), 1);
  for (Index j : s->row_col) ++s->col_counts[sz(j)];
  s->colptr.assign(sz(n) + 1, 0);
  for (Index j = 0; j < n; ++j) s->colptr[sz(j) + 1] = s->colptr[sz(j)] + s->col_counts[sz(j)];
  s->rowidx.assign(sz(s->colptr.back()), -1);
  s->row_slot.assign(s->row_col.size(), -1);
  std::vector<Index> fill(sz(n));
  for (Index j = 0; j < n; ++j) {
    s->rowidx[sz(s->colptr[sz(j)])] = j;
    fill[sz(j)] = s->colptr[sz(j)] + 1;
  }
  for (Index k = 0; k < n; ++k) {
    for (Index idx = s->row_ptr[sz(k)]; idx < s->row_ptr[sz(k) + 1]; ++idx) {
      const Index j = s->row_col[sz(idx)];
      const Index slot = fill[sz(j)]++;
      s->rowidx[sz(slot)] = k;
      s->row_slot[sz(idx)] = slot;
    }
  }

  // CSR pattern of L: strictly lower columns then the diagonal.
  {
    std::vector<Index> rp(sz(n) + 1, 0);
    std::vector<Index> ci;
    ci.reserve(s->row_col.size() + sz(n));
    for (Index k = 0; k < n; ++k) {
      ci.insert(ci.end(), s->row_col.begin() + s->row_ptr[sz(k)], s->row_col.begin() + s->row_ptr[sz(k) + 1]);
      ci.push_back(k);
      rp[sz(k) + 1] = static_cast<Index>(ci.size());
    }
    s->L_pattern = std::make_shared<const SparsityPattern>(n, n, std::move(rp), std::move(ci));
  }

  Scatter sc = build_scatter(*s, a, false);
  s->scatter_ptr = std::move(sc.ptr);
  s->scatter_col = std::move(sc.col);
  s->scatter_src = std::move(sc.src);
  return s;
}

CholFactors::CholFactors(std::shared_ptr<const SymbolicChol> symbolic)
    : symbolic_(std::move(symbolic)),
      lx_(sz(static_cast<Index>(symbolic_->rowidx.size())), 0.0),
      work_(sz(symbolic_->n), 0.0) {}

std::optional<NotSpd> CholFactors::refactorize(const CsMatrix& a) {
  const SymbolicChol& s = *symbolic_;
  if (a.rows() != s.n || a.cols() != s.n) throw DimensionError("chol_factorize: dimension mismatch");

  const bool analyzed = a.pattern_ptr() == s.input_pattern || a.pattern() == *s.input_pattern;
  Scatter local;
  if (!analyzed) local = build_scatter(s, a, true);
  const std::vector<Index>& sptr = analyzed ? s.scatter_ptr : local.ptr;
  const std::vector<Index>& scol = analyzed ? s.scatter_col : local.col;
  const std::vector<Index>& ssrc = analyzed ? s.scatter_src : local.src;

  const auto av = a.values();
  Vector& x = work_;
  std::fill(x.begin(), x.end(), 0.0);
  // fill[j]: one past the last computed entry of column j.
  std::vector<Index> fill(s.colptr.begin(), s.colptr.end() - 1);
  min_pivot_ = std::numeric_limits<double>::infinity();

  for (Index k = 0; k < s.n; ++k) {
    for (Index e = sptr[sz(k)]; e < sptr[sz(k) + 1]; ++e) x[sz(scol[sz(e)])] += av[sz(ssrc[sz(e)])];
    double d = x[sz(k)];
    x[sz(k)] = 0.0;
    for (Index idx = s.row_ptr[sz(k)]; idx < s.row_ptr[sz(k) + 1]; ++idx) {
      const Index j = s.row_col[sz(idx)];
      const double lkj = x[sz(j)] / lx_[sz(s.colptr[sz(j)])];
      x[sz(j)] = 0.0;
      for (Index p = s.colptr[sz(j)] + 1; p < fill[sz(j)]; ++p) x[sz(s.rowidx[sz(p)])] -= lx_[sz(p)] * lkj;
      d -= lkj * lkj;
      lx_[sz(s.row_slot[sz(idx)])] = lkj;
      ++fill[sz(j)];
    }
    if (!(d > 0.0)) {
      std::fill(x.begin(), x.end(), 0.0);
      return NotSpd{k, s.perm[k], d};
    }
    const double ljj = std::sqrt(d);
    lx_[sz(s.colptr[sz(k)])] = ljj;
    fill[sz(k)] = s.colptr[sz(k)] + 1;
    min_pivot_ = std::min(min_pivot_, ljj);
  }
  if (s.n == 0) min_pivot_ = 0.0;
  return std::nullopt;
}

CsMatrix CholFactors::lower() const {
  const SymbolicChol& s = *symbolic_;
  Vector vals(sz(s.L_pattern->nnz()));
  const auto rp = s.L_pattern->row_ptr();
  for (Index k = 0; k < s.n; ++k) {
    Index out = rp[sz(k)];
    for (Index idx = s.row_ptr[sz(k)]; idx < s.row_ptr[sz(k) + 1]; ++idx) vals[sz(out++)] = lx_[sz(s.row_slot[sz(idx)])];
    vals[sz(out)] = lx_[sz(s.colptr[sz(k)])];
  }
  return CsMatrix(s.L_pattern, std::move(vals));
}

void CholFactors::solve(std::span<const double> b, std::span<double> x) const {
  const SymbolicChol& s = *symbolic_;
  if (static_cast<Index>(b.size()) != s.n || static_cast<Index>(x.size()) != s.n) {
    throw DimensionError("chol_solve: vector length does not match factor dimension");
  }
  const auto perm = s.perm.perm();
  Vector y(sz(s.n));
  for (Index k = 0; k < s.n; ++k) y[sz(k)] = b[sz(perm[sz(k)])];
  for (Index j = 0; j < s.n; ++j) {
    y[sz(j)] /= lx_[sz(s.colptr[sz(j)])];
    const double yj = y[sz(j)];
    for (Index p = s.colptr[sz(j)] + 1; p < s.colptr[sz(j) + 1]; ++p) y[sz(s.rowidx[sz(p)])] -= lx_[sz(p)] * yj;
  }
  for (Index j = s.n - 1; j >= 0; --j) {
    double acc = y[sz(j)];
    for (Index p = s.colptr[sz(j)] + 1; p < s.colptr[sz(j) + 1]; ++p) acc -= lx_[sz(p)] * y[sz(s.rowidx[sz(p)])];
    y[sz(j)] = acc / lx_[sz(s.colptr[sz(j)])];
  }
  for (Index k = 0; k < s.n; ++k) x[sz(perm[sz(k)])] = y[sz(k)];
  solves_.increment();
}

Vector CholFactors::solve(std::span<const double> b) const {
  Vector x(sz(size()));
  solve(b, x);
  return x;
}

std::variant<CholFactors, NotSpd> chol_factorize(std::shared_ptr<const SymbolicChol> symbolic, const CsMatrix& a) {
  if (!symbolic) throw ConfigError("chol_factorize: null symbolic analysis");
  CholFactors f(std::move(symbolic));
  if (auto failure = f.refactorize(a)) return *failure;
  return f;
}

Vector chol_solve(const CholFactors& f, std::span<const double> b) { return f.solve(b); }

}  // namespace kktsolve
