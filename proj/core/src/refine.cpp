#include "kktsolve/refine.hpp"

#include <cmath>
#include <limits>

#include "kktsolve/error.hpp"

namespace kktsolve {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_dims(const CsMatrix& k, std::span<const double> x, std::span<const double> r) {
  if (!k.is_square() || static_cast<Index>(x.size()) != k.cols() || static_cast<Index>(r.size()) != k.rows()) {
    throw DimensionError("refine: dimensions do not conform");
  }
}

double quotient(double num, double den) {
  if (den == 0.0) return kInf;
  return num / den;
}

struct Quality {
  double nsr;
  double rr;
  double nrbe;
  double res2;
};

Quality measure(const CsMatrix& k, double k_norm, double r2, std::span<const double> x, std::span<const double> r) {
  const Vector rho = residual(k, x, r);
  Quality q{};
  q.res2 = norm2(rho);
  q.nsr = quotient(norm_inf(rho), k_norm * norm_inf(x));
  q.nrbe = quotient(q.res2, k_norm * norm2(x) + r2);
  q.rr = quotient(q.res2, r2);
  return q;
}

void fill_final(RefinementReport& rep, const Quality& q) {
  rep.nsr_after = q.nsr;
  rep.rr_final = q.rr;
  rep.nrbe_final = q.nrbe;
}

}  // namespace

std::string_view to_string(RefinementMethod m) {
  switch (m) {
    case RefinementMethod::none: return "none";
    case RefinementMethod::fgmres: return "fgmres";
    case RefinementMethod::richardson: return "richardson";
  }
  return "unknown";
}

double nsr(const CsMatrix& k, std::span<const double> x, std::span<const double> r) {
  check_dims(k, x, r);
  return quotient(norm_inf(residual(k, x, r)), inf_norm(k) * norm_inf(x));
}

double nrbe(const CsMatrix& k, std::span<const double> x, std::span<const double> r) {
  check_dims(k, x, r);
  return quotient(norm2(residual(k, x, r)), inf_norm(k) * norm2(x) + norm2(r));
}

double relative_residual(const CsMatrix& k, std::span<const double> x, std::span<const double> r) {
  check_dims(k, x, r);
  return quotient(norm2(residual(k, x, r)), norm2(r));
}

bool needs_refinement(const CsMatrix& k, std::span<const double> x0, std::span<const double> r, double delta_tol) {
  check_dims(k, x0, r);
  return norm2(residual(k, x0, r)) > delta_tol * norm2(r);
}

RefinementResult refine_fgmres(const CsMatrix& k, const LuFactors& factors, std::span<const double> x0,
                               std::span<const double> r, const RefinementConfig& cfg) {
  if (!(cfg.delta_tol > 0.0)) throw ConfigError("refine: delta_tol must be positive");
  check_dims(k, x0, r);
  if (factors.size() != k.rows()) throw DimensionError("refine: factor dimension differs from K");

  const double k_norm = inf_norm(k);
  const double r2 = norm2(r);
  const Quality before = measure(k, k_norm, r2, x0, r);

  RefinementResult out;
  out.report.method = RefinementMethod::fgmres;
  out.report.nsr_before = before.nsr;
  if (!(before.res2 > cfg.delta_tol * r2)) {
    out.x.assign(x0.begin(), x0.end());
    fill_final(out.report, before);
    out.report.converged = true;
    return out;
  }
  out.report.triggered = true;

  const std::uint64_t solves0 = factors.triangular_solve_count();
  KrylovConfig kc = cfg.krylov;
  kc.tol = cfg.delta_tol;
  KrylovResult kr = fgmres(matrix_operator(k), lu_operator(factors), r, x0, kc);
  out.report.ir_iterations = kr.iterations;
  out.report.triangular_solves_used = factors.triangular_solve_count() - solves0;

  const Quality after = measure(k, k_norm, r2, kr.x, r);
  const bool ok = kr.converged && after.nsr <= before.nsr && after.rr <= cfg.delta_tol;
  if (ok || after.res2 < before.res2) {
    out.x = std::move(kr.x);
    fill_final(out.report, after);
  } else {
    out.x.assign(x0.begin(), x0.end());
    fill_final(out.report, before);
  }
  out.report.converged = ok;
  return out;
}

RefinementResult refine_richardson(const CsMatrix& k, const LuFactors& factors, std::span<const double> x0,
                                   std::span<const double> r, const RefinementConfig& cfg) {
  if (!(cfg.delta_tol > 0.0)) throw ConfigError("refine: delta_tol must be positive");
  check_dims(k, x0, r);
  if (factors.size() != k.rows()) throw DimensionError("refine: factor dimension differs from K");

  const double k_norm = inf_norm(k);
  const double r2 = norm2(r);
  const double target = cfg.delta_tol * r2;
  const std::size_t n = x0.size();

  RefinementResult out;
  out.report.method = RefinementMethod::richardson;
  Vector x(x0.begin(), x0.end());
  Vector rho = residual(k, x, r);
  double res = norm2(rho);
  double nsr_old = quotient(norm_inf(rho), k_norm * norm_inf(x));
  out.report.nsr_before = nsr_old;
  if (!(res > target)) {
    out.x = std::move(x);
    fill_final(out.report, measure(k, k_norm, r2, out.x, r));
    out.report.converged = true;
    return out;
  }
  out.report.triggered = true;

  const std::uint64_t solves0 = factors.triangular_solve_count();
  Vector best = x;
  double best_res = res;
  double best_nsr = nsr_old;
  int growth = 0;
  bool met = false;
  Vector d(n);
  for (Index step = 0; step < cfg.richardson_max_steps; ++step) {
    lu_solve(factors, rho, d);
    axpy(1.0, d, x);
    ++out.report.ir_iterations;
    rho = residual(k, x, r);
    const double res_new = norm2(rho);
    const double nsr_new = quotient(norm_inf(rho), k_norm * norm_inf(x));
    if (!std::isfinite(res_new)) {
      out.report.diverged = true;
      break;
    }
    growth = res_new > res ? growth + 1 : 0;
    if (res_new < best_res) {
      best = x;
      best_res = res_new;
      best_nsr = nsr_new;
    }
    if (growth >= 2) {
      out.report.diverged = true;
      break;
    }
    if (cfg.richardson_stop == RichardsonStop::tolerance && res_new <= target) {
      met = true;
      break;
    }
    if (cfg.richardson_stop == RichardsonStop::nsr_ratio && nsr_new > cfg.nsr_ratio_floor * nsr_old) {
      met = true;
      break;
    }
    res = res_new;
    nsr_old = nsr_new;
  }
  out.report.triangular_solves_used = factors.triangular_solve_count() - solves0;
  out.x = std::move(best);
  fill_final(out.report, measure(k, k_norm, r2, out.x, r));
  out.report.converged = met && !out.report.diverged && best_nsr <= out.report.nsr_before;
  return out;
}

}  // namespace kktsolve
