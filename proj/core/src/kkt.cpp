#include "kktsolve/kkt.hpp"

#include <algorithm>
#include <string>

#include "kktsolve/error.hpp"

namespace kktsolve {

namespace {

std::size_t sz(Index i) { return static_cast<std::size_t>(i); }

void check_positive(std::span<const double> v, const char* name) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0)) {
      throw ConfigError(std::string("kkt: ") + name + "[" + std::to_string(i) + "] = " + std::to_string(v[i]) +
                        " is not positive");
    }
  }
}

}  // namespace

Vector KktRhs::stacked() const {
  Vector out(r_x);
  out.insert(out.end(), r_lambda.begin(), r_lambda.end());
  return out;
}

KktAssembler::KktAssembler(const CsMatrix& h, const CsMatrix& j)
    : n_(h.rows()), m_(j.rows()), h_pattern_(h.pattern_ptr()), j_pattern_(j.pattern_ptr()) {
  if (!h.is_square()) throw DimensionError("kkt: H must be square");
  if (j.cols() != n_) throw DimensionError("kkt: J must have as many columns as H");
  const Index dim = n_ + m_;
  std::vector<Index> rp(sz(dim) + 1, 0);
  std::vector<Index> ci;
  ci.reserve(sz(h.nnz() + n_ + j.nnz()));
  const auto hrp = h.row_ptr();
  const auto hci = h.col_idx();
  std::vector<Index> row;
  for (Index i = 0; i < n_; ++i) {
    row.clear();
    for (Index p = hrp[sz(i)]; p < hrp[sz(i) + 1]; ++p) {
      if (hci[sz(p)] <= i) row.push_back(hci[sz(p)]);
    }
    if (row.empty() || row.back() != i) row.push_back(i);
    ci.insert(ci.end(), row.begin(), row.end());
    rp[sz(i) + 1] = static_cast<Index>(ci.size());
  }
  const auto jrp = j.row_ptr();
  const auto jci = j.col_idx();
  for (Index r = 0; r < m_; ++r) {
    ci.insert(ci.end(), jci.begin() + jrp[sz(r)], jci.begin() + jrp[sz(r) + 1]);
    rp[sz(n_ + r) + 1] = static_cast<Index>(ci.size());
  }
  pattern_ = std::make_shared<const SparsityPattern>(dim, dim, std::move(rp), std::move(ci));

  h_slot_.assign(sz(h.nnz()), -1);
  for (Index i = 0; i < n_; ++i) {
    for (Index p = hrp[sz(i)]; p < hrp[sz(i) + 1]; ++p) {
      if (hci[sz(p)] <= i) h_slot_[sz(p)] = pattern_->find(i, hci[sz(p)]);
    }
  }
  diag_slot_.resize(sz(n_));
  for (Index i = 0; i < n_; ++i) diag_slot_[sz(i)] = pattern_->find(i, i);
  j_slot_.resize(sz(j.nnz()));
  for (Index r = 0; r < m_; ++r) {
    for (Index p = jrp[sz(r)]; p < jrp[sz(r) + 1]; ++p) j_slot_[sz(p)] = pattern_->find(n_ + r, jci[sz(p)]);
  }
}

CsMatrix KktAssembler::assemble(const CsMatrix& h, const CsMatrix& j, std::span<const double> dx_diag) const {
  const auto same = [](const CsMatrix& a, const PatternPtr& p) { return a.pattern_ptr() == p || a.pattern() == *p; };
  if (!same(h, h_pattern_)) throw PatternError("kkt: H pattern differs from the assembler's");
  if (!same(j, j_pattern_)) throw PatternError("kkt: J pattern differs from the assembler's");
  if (static_cast<Index>(dx_diag.size()) != n_) throw DimensionError("kkt: D_x length must equal n");
  Vector vals(sz(pattern_->nnz()), 0.0);
  const auto hv = h.values();
  for (std::size_t p = 0; p < h_slot_.size(); ++p) {
    if (h_slot_[p] >= 0) vals[sz(h_slot_[p])] += hv[p];
  }
  for (Index i = 0; i < n_; ++i) vals[sz(diag_slot_[sz(i)])] += dx_diag[sz(i)];
  const auto jv = j.values();
  for (std::size_t p = 0; p < j_slot_.size(); ++p) vals[sz(j_slot_[p])] = jv[p];
  return CsMatrix(pattern_, std::move(vals), Symmetry::symmetric_lower);
}

KktSystem KktAssembler::assemble(const KktBlocks& blocks) const {
  if (static_cast<Index>(blocks.x.size()) != n_ || static_cast<Index>(blocks.z.size()) != n_) {
    throw DimensionError("kkt: x and z must have length n");
  }
  check_positive(blocks.x, "x");
  check_positive(blocks.z, "z");
  KktSystem sys;
  sys.dx_diag.resize(sz(n_));
  for (Index i = 0; i < n_; ++i) sys.dx_diag[sz(i)] = blocks.z[sz(i)] / blocks.x[sz(i)];
  sys.K = assemble(blocks.H, blocks.J, sys.dx_diag);
  sys.blocks = blocks;
  return sys;
}

KktSystem assemble_kkt(const KktBlocks& blocks) { return KktAssembler(blocks.H, blocks.J).assemble(blocks); }

KktRhs assemble_rhs(const KktBlocks& blocks, std::span<const double> r_tilde_x, std::span<const double> r_lambda,
                    std::span<const double> r_z) {
  const Index n = blocks.n();
  if (static_cast<Index>(r_tilde_x.size()) != n || static_cast<Index>(r_z.size()) != n ||
      static_cast<Index>(r_lambda.size()) != blocks.m() || static_cast<Index>(blocks.x.size()) != n ||
      static_cast<Index>(blocks.z.size()) != n) {
    throw DimensionError("kkt: right-hand side lengths do not conform");
  }
  KktRhs rhs;
  rhs.r_tilde_x.assign(r_tilde_x.begin(), r_tilde_x.end());
  rhs.r_lambda.assign(r_lambda.begin(), r_lambda.end());
  rhs.r_z.assign(r_z.begin(), r_z.end());
  rhs.r_x.resize(sz(n));
  for (Index i = 0; i < n; ++i) {
    rhs.r_x[sz(i)] = r_tilde_x[sz(i)] + blocks.z[sz(i)] - blocks.mu / blocks.x[sz(i)];
  }
  return rhs;
}

Vector recover_dz(const KktBlocks& blocks, std::span<const double> r_z, std::span<const double> dx) {
  const Index n = blocks.n();
  if (static_cast<Index>(r_z.size()) != n || static_cast<Index>(dx.size()) != n) {
    throw DimensionError("kkt: recover_dz lengths do not conform");
  }
  Vector dz(sz(n));
  for (Index i = 0; i < n; ++i) {
    dz[sz(i)] = (r_z[sz(i)] - blocks.z[sz(i)] * dx[sz(i)]) / blocks.x[sz(i)];
  }
  return dz;
}

Vector recover_dz(const KktBlocks& blocks, const KktRhs& rhs, std::span<const double> dx,
                  std::span<const double> dlambda, DzRecovery variant) {
  if (variant == DzRecovery::complementarity) return recover_dz(blocks, rhs.r_z, dx);
  if (static_cast<Index>(dlambda.size()) != blocks.m()) throw DimensionError("kkt: dlambda length must equal m");
  Vector dz = spmv(blocks.H.is_symmetric_lower() ? blocks.H : lower_triangle(blocks.H), dx);
  const Vector jt = spmv(blocks.J, dlambda, true);
  for (std::size_t i = 0; i < dz.size(); ++i) dz[i] += jt[i] - rhs.r_tilde_x[i];
  return dz;
}

Vector gamma_rhs(const CsMatrix& j, std::span<const double> r_x, std::span<const double> r_lambda, double gamma) {
  if (static_cast<Index>(r_x.size()) != j.cols() || static_cast<Index>(r_lambda.size()) != j.rows()) {
    throw DimensionError("kkt: gamma_rhs lengths do not conform");
  }
  Vector out(r_x.begin(), r_x.end());
  if (gamma != 0.0) axpy(gamma, spmv(j, r_lambda, true), out);
  return out;
}

}  // namespace kktsolve
