#include "kktsolve/krylov.hpp"

#include <algorithm>
#include <cmath>

#include "kktsolve/cholesky.hpp"
#include "kktsolve/error.hpp"
#include "kktsolve/lu.hpp"

namespace kktsolve {

namespace {

std::size_t sz(Index i) { return static_cast<std::size_t>(i); }

constexpr double kBreakdownRatio = 1e-14;

void check_finite(std::span<const double> v, const char* where) {
  if (!all_finite(v)) throw Error(std::string(where) + ": operator produced a non-finite vector");
}

}  // namespace

LinearOperator identity_operator(Index n) {
  return {n, [](std::span<const double> in, std::span<double> out) { std::copy(in.begin(), in.end(), out.begin()); }};
}

LinearOperator matrix_operator(const CsMatrix& a) {
  if (!a.is_square()) throw DimensionError("matrix_operator: matrix must be square");
  return {a.rows(), [&a](std::span<const double> in, std::span<double> out) { spmv(a, in, out); }};
}

LinearOperator lu_operator(const LuFactors& factors) {
  return {factors.size(), [&factors](std::span<const double> in, std::span<double> out) { lu_solve(factors, in, out); }};
}

LinearOperator chol_operator(const CholFactors& factors) {
  return {factors.size(), [&factors](std::span<const double> in, std::span<double> out) { factors.solve(in, out); }};
}

OrthoStep cgs2_step(std::span<const double> basis, Index count, std::span<const double> w) {
  const std::size_t n = w.size();
  if (basis.size() < sz(count) * n) throw DimensionError("cgs2_step: basis too small");
  OrthoStep out;
  out.h.assign(sz(count), 0.0);
  out.w.assign(w.begin(), w.end());
  const double w_norm = norm2(w);
  Vector c(sz(count));
  for (int pass = 0; pass < 2; ++pass) {
    for (Index i = 0; i < count; ++i) c[sz(i)] = dot(basis.subspan(sz(i) * n, n), out.w);
    for (Index i = 0; i < count; ++i) {
      axpy(-c[sz(i)], basis.subspan(sz(i) * n, n), out.w);
      out.h[sz(i)] += c[sz(i)];
    }
  }
  out.norm = norm2(out.w);
  out.breakdown = out.norm <= kBreakdownRatio * w_norm;
  return out;
}

OrthoStep mgs_step(std::span<const double> basis, Index count, std::span<const double> w) {
  const std::size_t n = w.size();
  if (basis.size() < sz(count) * n) throw DimensionError("mgs_step: basis too small");
  OrthoStep out;
  out.h.assign(sz(count), 0.0);
  out.w.assign(w.begin(), w.end());
  const double w_norm = norm2(w);
  for (Index i = 0; i < count; ++i) {
    const auto v = basis.subspan(sz(i) * n, n);
    out.h[sz(i)] = dot(v, out.w);
    axpy(-out.h[sz(i)], v, out.w);
  }
  out.norm = norm2(out.w);
  out.breakdown = out.norm <= kBreakdownRatio * w_norm;
  return out;
}

KrylovResult fgmres(const LinearOperator& k, const LinearOperator& m, std::span<const double> b,
                    std::span<const double> x0, const KrylovConfig& cfg) {
  if (cfg.restart < 1) throw ConfigError("fgmres: restart must be at least 1");
  if (!(cfg.tol > 0.0)) throw ConfigError("fgmres: tolerance must be positive");
  const Index n = k.dim;
  if (m.dim != n || static_cast<Index>(b.size()) != n || static_cast<Index>(x0.size()) != n) {
    throw DimensionError("fgmres: operator and vector dimensions differ");
  }
  const Index restart = cfg.restart;
  const std::size_t un = sz(n);

  KrylovResult res;
  res.x.assign(x0.begin(), x0.end());
  Vector r(un);
  auto true_residual = [&] {
    k.apply(res.x, r);
    check_finite(r, "fgmres");
    for (std::size_t i = 0; i < un; ++i) r[i] = b[i] - r[i];
    return norm2(r);
  };

  double beta = true_residual();
  res.initial_residual = beta;
  res.est_residual_history.push_back(beta);
  if (beta == 0.0) {
    res.converged = true;
    res.true_final_residual = 0.0;
    return res;
  }
  const double target = cfg.tol * res.initial_residual;
  const double breakdown_tol = kBreakdownRatio * res.initial_residual;

  Vector v_basis(sz(restart + 1) * un);
  Vector z_basis(sz(restart) * un);
  Vector hess(sz(restart + 1) * sz(restart), 0.0);  // column-major, ld = restart + 1
  Vector cs(sz(restart)), sn(sz(restart)), g(sz(restart) + 1), y(sz(restart));
  Vector w(un);
  const std::size_t ld = sz(restart) + 1;
  auto h = [&](Index i, Index j) -> double& { return hess[sz(j) * ld + sz(i)]; };

  for (;;) {
    for (std::size_t i = 0; i < un; ++i) v_basis[i] = r[i] / beta;
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = beta;
    Index cols = 0;
    double est = beta;

    for (Index j = 0; j < restart && res.iterations < cfg.max_iterations; ++j) {
      auto zj = std::span<double>(z_basis).subspan(sz(j) * un, un);
      m.apply(std::span<const double>(v_basis).subspan(sz(j) * un, un), zj);
      ++res.precond_applications;
      check_finite(zj, "fgmres preconditioner");
      k.apply(zj, w);
      check_finite(w, "fgmres");

      const auto basis = std::span<const double>(v_basis).first(sz(j + 1) * un);
      OrthoStep step = cfg.ortho == Orthogonalization::cgs2 ? cgs2_step(basis, j + 1, w) : mgs_step(basis, j + 1, w);
      for (Index i = 0; i <= j; ++i) h(i, j) = step.h[sz(i)];
      h(j + 1, j) = step.norm;

      for (Index i = 0; i < j; ++i) {
        const double t = cs[sz(i)] * h(i, j) + sn[sz(i)] * h(i + 1, j);
        h(i + 1, j) = -sn[sz(i)] * h(i, j) + cs[sz(i)] * h(i + 1, j);
        h(i, j) = t;
      }
      const double denom = std::hypot(h(j, j), h(j + 1, j));
      if (denom == 0.0) {
        cs[sz(j)] = 1.0;
        sn[sz(j)] = 0.0;
      } else {
        cs[sz(j)] = h(j, j) / denom;
        sn[sz(j)] = h(j + 1, j) / denom;
      }
      h(j, j) = denom;
      h(j + 1, j) = 0.0;
      g[sz(j) + 1] = -sn[sz(j)] * g[sz(j)];
      g[sz(j)] = cs[sz(j)] * g[sz(j)];

      est = std::abs(g[sz(j) + 1]);
      res.est_residual_history.push_back(est);
      ++res.iterations;
      cols = j + 1;

      if (step.norm <= breakdown_tol || est <= target) {
        res.converged = true;
        break;
      }
      auto vnext = std::span<double>(v_basis).subspan(sz(j + 1) * un, un);
      for (std::size_t i = 0; i < un; ++i) vnext[i] = step.w[i] / step.norm;
    }

    // x += Z y with H y = g on the leading cols x cols triangle.
    for (Index i = cols - 1; i >= 0; --i) {
      double acc = g[sz(i)];
      for (Index l = i + 1; l < cols; ++l) acc -= h(i, l) * y[sz(l)];
      y[sz(i)] = h(i, i) != 0.0 ? acc / h(i, i) : 0.0;
    }
    for (Index l = 0; l < cols; ++l) axpy(y[sz(l)], std::span<const double>(z_basis).subspan(sz(l) * un, un), res.x);

    beta = true_residual();
    res.cycle_checks.emplace_back(est, beta);
    if (!res.converged && beta <= target) res.converged = true;
    if (res.converged || res.iterations >= cfg.max_iterations || beta == 0.0 || cols == 0) break;
    ++res.restarts;
    res.est_residual_history.push_back(beta);
  }
  res.true_final_residual = beta;
  return res;
}

KrylovResult cg(const LinearOperator& s, std::span<const double> b, std::span<const double> x0, double tol,
                Index maxit) {
  if (!(tol > 0.0)) throw ConfigError("cg: tolerance must be positive");
  const Index n = s.dim;
  if (static_cast<Index>(b.size()) != n || static_cast<Index>(x0.size()) != n) {
    throw DimensionError("cg: operator and vector dimensions differ");
  }
  const std::size_t un = sz(n);
  KrylovResult res;
  res.x.assign(x0.begin(), x0.end());
  Vector r(un), p(un), sp(un);
  s.apply(res.x, r);
  for (std::size_t i = 0; i < un; ++i) r[i] = b[i] - r[i];
  const double r0 = norm2(r);
  res.initial_residual = r0;
  res.est_residual_history.push_back(r0);
  if (r0 == 0.0) {
    res.converged = true;
    return res;
  }
  p = r;
  double rr = dot(r, r);
  for (Index it = 0; it < maxit; ++it) {
    s.apply(p, sp);
    ++res.precond_applications;
    const double psp = dot(p, sp);
    if (!std::isfinite(psp)) throw Error("cg: operator produced a non-finite vector");
    if (!(psp > 0.0)) throw NotSpdError("cg: nonpositive curvature p^T S p = " + std::to_string(psp));
    const double alpha = rr / psp;
    axpy(alpha, p, res.x);
    axpy(-alpha, sp, r);
    const double rr_new = dot(r, r);
    ++res.iterations;
    const double rnorm = std::sqrt(rr_new);
    res.est_residual_history.push_back(rnorm);
    if (rnorm <= tol * r0) {
      res.converged = true;
      break;
    }
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < un; ++i) p[i] = r[i] + beta * p[i];
  }
  s.apply(res.x, sp);
  for (std::size_t i = 0; i < un; ++i) sp[i] = b[i] - sp[i];
  res.true_final_residual = norm2(sp);
  return res;
}

}  // namespace kktsolve
