#include "kktsolve/hykkt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "kktsolve/error.hpp"
#include "kktsolve/ordering.hpp"

namespace kktsolve {

namespace {

using Clock = std::chrono::steady_clock;

std::size_t sz(Index i) { return static_cast<std::size_t>(i); }

bool same_pattern(const CsMatrix& a, const PatternPtr& p) { return a.pattern_ptr() == p || a.pattern() == *p; }

}  // namespace

StageTimings HykktSolver::empty_timings() {
  StageTimings t;
  for (auto name : kHykktStages) t.emplace(std::string(name), 0.0);
  return t;
}

void HykktSolver::add_time(std::string_view stage, Clock::time_point start) {
  const double s = std::chrono::duration<double>(Clock::now() - start).count();
  timings_.find(stage)->second += s;
}

StageTimings HykktSolver::take_stage_timings() {
  StageTimings out = std::move(timings_);
  timings_ = empty_timings();
  return out;
}

void HykktSolver::check_shapes(const CsMatrix& h, const CsMatrix& j, std::span<const double> dx_diag) const {
  if (!same_pattern(h, h_pattern_)) throw PatternError("hykkt: H pattern differs from the one used at setup");
  if (!same_pattern(j, j_pattern_)) throw PatternError("hykkt: J pattern differs from the one used at setup");
  if (static_cast<Index>(dx_diag.size()) != n_) throw DimensionError("hykkt: D_x length must equal n");
}

HykktSolver HykktSolver::setup(const CsMatrix& h, const CsMatrix& j, std::span<const double> dx_diag,
                               const HykktConfig& cfg) {
  HykktSolver s;
  s.timings_ = empty_timings();
  s.cfg_ = cfg;

  auto t = Clock::now();
  if (!h.is_square()) throw DimensionError("hykkt: H must be square");
  if (j.cols() != h.rows()) throw DimensionError("hykkt: J must have as many columns as H");
  if (cfg.gamma && !(*cfg.gamma >= 0.0)) throw ConfigError("hykkt: gamma must be nonnegative");
  if (!(cfg.gamma_escalation > 1.0)) throw ConfigError("hykkt: gamma escalation factor must exceed 1");
  if (cfg.max_escalations < 0 || cfg.ruiz_iters < 0) throw ConfigError("hykkt: negative iteration count");
  if (!(cfg.cg_tol > 0.0)) throw ConfigError("hykkt: cg_tol must be positive");
  s.n_ = h.rows();
  s.m_ = j.rows();
  s.h_pattern_ = h.pattern_ptr();
  s.j_pattern_ = j.pattern_ptr();
  const auto jrp = j.row_ptr();
  for (Index r = 0; r < s.m_; ++r) {
    if (jrp[sz(r)] == jrp[sz(r) + 1]) {
      throw SingularMatrixError("hykkt: row " + std::to_string(r) + " of J is empty", static_cast<long>(r), true);
    }
  }
  {
    Vector iota(sz(j.nnz()));
    std::iota(iota.begin(), iota.end(), 0.0);
    const CsMatrix jt_index = transpose(j.with_values(std::move(iota)));
    s.jt_src_.resize(sz(jt_index.nnz()));
    for (Index p = 0; p < jt_index.nnz(); ++p) s.jt_src_[sz(p)] = static_cast<Index>(jt_index.values()[sz(p)]);
    s.jt_ = jt_index.with_values(Vector(sz(jt_index.nnz()), 0.0));
  }
  s.js_ = j.with_values(Vector(sz(j.nnz()), 0.0));
  s.add_time("setup_parameters", t);

  t = Clock::now();
  s.kkt_ = std::make_unique<KktAssembler>(h, j);
  {
    // H~ pattern: lower triangle of H plus the diagonal.
    const auto hrp = h.row_ptr();
    const auto hci = h.col_idx();
    std::vector<Index> rp(sz(s.n_) + 1, 0);
    std::vector<Index> ci;
    for (Index i = 0; i < s.n_; ++i) {
      bool diag = false;
      for (Index p = hrp[sz(i)]; p < hrp[sz(i) + 1]; ++p) {
        if (hci[sz(p)] > i) continue;
        ci.push_back(hci[sz(p)]);
        diag = diag || hci[sz(p)] == i;
      }
      if (!diag) ci.push_back(i);
      rp[sz(i) + 1] = static_cast<Index>(ci.size());
    }
    auto pat = std::make_shared<const SparsityPattern>(s.n_, s.n_, std::move(rp), std::move(ci));
    s.h_to_htil_.assign(sz(h.nnz()), -1);
    for (Index i = 0; i < s.n_; ++i) {
      for (Index p = hrp[sz(i)]; p < hrp[sz(i) + 1]; ++p) {
        if (hci[sz(p)] <= i) s.h_to_htil_[sz(p)] = pat->find(i, hci[sz(p)]);
      }
    }
    s.diag_htil_.resize(sz(s.n_));
    for (Index i = 0; i < s.n_; ++i) s.diag_htil_[sz(i)] = pat->find(i, i);
    s.htil_ = CsMatrix(pat, Vector(sz(pat->nnz()), 0.0), Symmetry::symmetric_lower);
  }
  s.add_time("setup_spgemm_htil", t);

  t = Clock::now();
  s.check_shapes(h, j, dx_diag);
  if (!all_finite(dx_diag) || !all_finite(h.values()) || !all_finite(j.values())) {
    throw ConfigError("hykkt: non-finite input values");
  }
  s.add_time("setup_solution_check", t);

  t = Clock::now();
  if (cfg.ruiz_iters > 0) {
    s.ruiz_ = ruiz_scale(s.kkt_->assemble(h, j, dx_diag), cfg.ruiz_iters);
  } else {
    s.ruiz_.d.assign(sz(s.n_ + s.m_), 1.0);
    s.ruiz_.converged = true;
  }
  s.add_time("setup_ruiz_scaling", t);

  t = Clock::now();
  s.jtj_pattern_ = spgemm_symbolic(s.jt_, s.js_);
  s.jtj_vals_.assign(sz(s.jtj_pattern_->nnz()), 0.0);
  {
    const SparsityPattern& ht = s.htil_.pattern();
    const SparsityPattern& jtj = *s.jtj_pattern_;
    std::vector<Index> rp(sz(s.n_) + 1, 0);
    std::vector<Index> ci;
    std::vector<Index> row;
    for (Index i = 0; i < s.n_; ++i) {
      row.clear();
      for (Index p = ht.row_ptr()[sz(i)]; p < ht.row_ptr()[sz(i) + 1]; ++p) row.push_back(ht.col_idx()[sz(p)]);
      for (Index p = jtj.row_ptr()[sz(i)]; p < jtj.row_ptr()[sz(i) + 1]; ++p) {
        if (jtj.col_idx()[sz(p)] <= i) row.push_back(jtj.col_idx()[sz(p)]);
      }
      std::sort(row.begin(), row.end());
      row.erase(std::unique(row.begin(), row.end()), row.end());
      ci.insert(ci.end(), row.begin(), row.end());
      rp[sz(i) + 1] = static_cast<Index>(ci.size());
    }
    auto pat = std::make_shared<const SparsityPattern>(s.n_, s.n_, std::move(rp), std::move(ci));
    s.htil_to_hg_.resize(sz(ht.nnz()));
    s.jtj_to_hg_.assign(sz(jtj.nnz()), -1);
    for (Index i = 0; i < s.n_; ++i) {
      for (Index p = ht.row_ptr()[sz(i)]; p < ht.row_ptr()[sz(i) + 1]; ++p) {
        s.htil_to_hg_[sz(p)] = pat->find(i, ht.col_idx()[sz(p)]);
      }
      for (Index p = jtj.row_ptr()[sz(i)]; p < jtj.row_ptr()[sz(i) + 1]; ++p) {
        if (jtj.col_idx()[sz(p)] <= i) s.jtj_to_hg_[sz(p)] = pat->find(i, jtj.col_idx()[sz(p)]);
      }
    }
    s.hgamma_ = CsMatrix(pat, Vector(sz(pat->nnz()), 0.0), Symmetry::symmetric_lower);
  }
  s.add_time("setup_spgemm_hgamma", t);

  t = Clock::now();
  Permutation perm = cfg.ordering == ColumnOrdering::amd ? amd_order(s.hgamma_) : Permutation::identity(s.n_);
  s.add_time("setup_permutation", t);

  t = Clock::now();
  s.symbolic_ = chol_analyze(s.hgamma_, std::move(perm));
  s.add_time("setup_hgamma_factorization", t);

  t = Clock::now();
  if (cfg.gamma) {
    s.gamma_ = *cfg.gamma;
    s.gamma_set_ = true;
  }
  s.add_time("setup_conjugate_gradient", t);
  return s;
}

void HykktSolver::scale_values(const CsMatrix& h, const CsMatrix& j, std::span<const double> dx_diag) {
  auto t = Clock::now();
  if (cfg_.rescale_each_system && cfg_.ruiz_iters > 0) ruiz_ = ruiz_scale(kkt_->assemble(h, j, dx_diag), cfg_.ruiz_iters);
  const auto d = std::span<const double>(ruiz_.d);
  const auto dl = d.subspan(sz(n_));
  {
    const auto rp = j.row_ptr();
    const auto ci = j.col_idx();
    const auto jv = j.values();
    auto out = js_.values();
    for (Index r = 0; r < m_; ++r) {
      for (Index p = rp[sz(r)]; p < rp[sz(r) + 1]; ++p) out[sz(p)] = dl[sz(r)] * jv[sz(p)] * d[sz(ci[sz(p)])];
    }
    auto jt = jt_.values();
    for (std::size_t q = 0; q < jt_src_.size(); ++q) jt[q] = out[sz(jt_src_[q])];
  }
  add_time("compute_ruiz_scaling", t);

  t = Clock::now();
  {
    auto out = htil_.values();
    std::fill(out.begin(), out.end(), 0.0);
    const auto rp = h.row_ptr();
    const auto ci = h.col_idx();
    const auto hv = h.values();
    for (Index i = 0; i < n_; ++i) {
      for (Index p = rp[sz(i)]; p < rp[sz(i) + 1]; ++p) {
        const Index slot = h_to_htil_[sz(p)];
        if (slot >= 0) out[sz(slot)] += d[sz(i)] * hv[sz(p)] * d[sz(ci[sz(p)])];
      }
    }
    for (Index i = 0; i < n_; ++i) out[sz(diag_htil_[sz(i)])] += d[sz(i)] * d[sz(i)] * dx_diag[sz(i)];
  }
  add_time("compute_spgemm_htil", t);
}

HykktFactorReport HykktSolver::factorize(const CsMatrix& h, const CsMatrix& j, std::span<const double> dx_diag) {
  check_shapes(h, j, dx_diag);
  factorized_ = false;
  scale_values(h, j, dx_diag);

  auto t = Clock::now();
  spgemm_numeric(jt_, js_, *jtj_pattern_, jtj_vals_);
  if (!gamma_set_) {
    const double jn = inf_norm(js_);
    const double g = inf_norm(htil_) / std::max(jn * jn, std::numeric_limits<double>::epsilon());
    gamma_ = std::clamp(g, 1.0, 1e12);
    gamma_set_ = true;
  }
  add_time("compute_spgemm_hgamma", t);

  HykktFactorReport report;
  const auto hv = htil_.values();
  for (int attempt = 0;; ++attempt) {
    t = Clock::now();
    auto out = hgamma_.values();
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t p = 0; p < htil_to_hg_.size(); ++p) out[sz(htil_to_hg_[p])] += hv[p];
    for (std::size_t p = 0; p < jtj_to_hg_.size(); ++p) {
      if (jtj_to_hg_[p] >= 0) out[sz(jtj_to_hg_[p])] += gamma_ * jtj_vals_[p];
    }
    add_time("compute_spgemm_hgamma", t);

    t = Clock::now();
    std::optional<NotSpd> failure;
    if (!chol_) {
      auto res = chol_factorize(symbolic_, hgamma_);
      if (auto* f = std::get_if<CholFactors>(&res)) {
        chol_ = std::make_unique<CholFactors>(std::move(*f));
      } else {
        failure = std::get<NotSpd>(res);
      }
    } else {
      failure = chol_->refactorize(hgamma_);
    }
    add_time("compute_hgamma_factorization", t);

    report.attempts.push_back({gamma_, !failure, failure ? failure->pivot : 0.0});
    if (!failure) break;
    if (attempt >= cfg_.max_escalations) {
      throw NotSpdError("hykkt: H_gamma is not positive definite after " + std::to_string(attempt + 1) +
                        " attempts (last gamma = " + std::to_string(gamma_) + "); J may be rank deficient or H " +
                        "indefinite on the null space of J");
    }
    gamma_ = gamma_ == 0.0 ? 1.0 : gamma_ * cfg_.gamma_escalation;
  }
  factorized_ = true;
  report.gamma = gamma_;
  report.min_pivot = chol_->min_pivot();
  return report;
}

Vector HykktSolver::schur_apply(std::span<const double> v) const {
  if (!factorized()) throw Error("hykkt: schur_apply before a successful factorize");
  if (static_cast<Index>(v.size()) != m_) throw DimensionError("hykkt: Schur operand length must equal m");
  Vector tmp = spmv(js_, v, true);
  Vector sol = chol_->solve(tmp);
  return spmv(js_, sol);
}

LinearOperator HykktSolver::schur_operator() const {
  if (!factorized()) throw Error("hykkt: schur_operator before a successful factorize");
  return {m_, [this, tmp = std::make_shared<Vector>(sz(n_)), sol = std::make_shared<Vector>(sz(n_))](
                  std::span<const double> in, std::span<double> out) {
            spmv(js_, in, *tmp, true);
            chol_->solve(*tmp, *sol);
            spmv(js_, *sol, out);
          }};
}

HykktSolution HykktSolver::solve(std::span<const double> r_x, std::span<const double> r_lambda) {
  if (!factorized()) throw Error("hykkt: solve before a successful factorize");
  if (static_cast<Index>(r_x.size()) != n_ || static_cast<Index>(r_lambda.size()) != m_) {
    throw DimensionError("hykkt: right-hand side lengths do not conform");
  }
  const std::uint64_t solves0 = chol_->triangular_solve_count();
  const auto d = std::span<const double>(ruiz_.d);
  const auto dl = d.subspan(sz(n_));

  // Scale the right-hand side into the equilibrated system.
  auto t = Clock::now();
  Vector rxs(sz(n_)), rls(sz(m_));
  for (Index i = 0; i < n_; ++i) rxs[sz(i)] = d[sz(i)] * r_x[sz(i)];
  for (Index i = 0; i < m_; ++i) rls[sz(i)] = dl[sz(i)] * r_lambda[sz(i)];
  add_time("apply_permutation", t);

  t = Clock::now();
  Vector rbar = rxs;
  if (gamma_ != 0.0 && m_ > 0) axpy(gamma_, spmv(js_, rls, true), rbar);
  Vector schur_rhs = spmv(js_, chol_->solve(rbar));
  axpy(-1.0, rls, schur_rhs);
  KrylovResult cgr;
  try {
    cgr = cg(schur_operator(), schur_rhs, Vector(sz(m_), 0.0), cfg_.cg_tol, cfg_.cg_maxit);
  } catch (const NotSpdError& e) {
    throw NotSpdError(std::string(e.what()) + " in the Schur complement at gamma = " + std::to_string(gamma_));
  }
  add_time("compute_conjugate_gradient", t);

  t = Clock::now();
  Vector w = rbar;
  if (m_ > 0) axpy(-1.0, spmv(js_, cgr.x, true), w);
  Vector dxs = chol_->solve(w);
  HykktSolution out;
  out.dx.resize(sz(n_));
  out.dlambda.resize(sz(m_));
  for (Index i = 0; i < n_; ++i) out.dx[sz(i)] = d[sz(i)] * dxs[sz(i)];
  for (Index i = 0; i < m_; ++i) out.dlambda[sz(i)] = dl[sz(i)] * cgr.x[sz(i)];
  add_time("recover_solution", t);

  out.cg_iterations = cgr.iterations;
  out.converged = cgr.converged;
  out.cg_relative_residual = cgr.initial_residual > 0.0 ? cgr.true_final_residual / cgr.initial_residual : 0.0;
  out.cholesky_solves = chol_->triangular_solve_count() - solves0;
  out.gamma = gamma_;
  return out;
}

}  // namespace kktsolve
