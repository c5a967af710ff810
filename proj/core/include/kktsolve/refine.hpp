#pragma once

#include <cstdint>
#include <string_view>

#include "kktsolve/krylov.hpp"
#include "kktsolve/lu.hpp"
#include "kktsolve/sparse.hpp"

namespace kktsolve {

/// Stopping rule of the Richardson loop.
enum class RichardsonStop {
  /// ||r - K x||_2 <= delta_tol ||r||_2
  tolerance,
  /// NSR_new / NSR_old > nsr_ratio_floor (stagnation)
  nsr_ratio,
};

struct RefinementConfig {
  /// Trigger threshold and FGMRES relative tolerance.
  double delta_tol = 1e-10;
  /// FGMRES settings; `tol` is overwritten by delta_tol.
  KrylovConfig krylov{};
  Index richardson_max_steps = 10;
  RichardsonStop richardson_stop = RichardsonStop::tolerance;
  double nsr_ratio_floor = 0.5;
};

enum class RefinementMethod { none, fgmres, richardson };

std::string_view to_string(RefinementMethod m);

struct RefinementReport {
  bool triggered = false;
  RefinementMethod method = RefinementMethod::none;
  Index ir_iterations = 0;
  std::uint64_t triangular_solves_used = 0;
  double nsr_before = 0.0;
  double nsr_after = 0.0;
  /// ||r - K x||_2 / ||r||_2 of the returned x.
  double rr_final = 0.0;
  double nrbe_final = 0.0;
  /// Untriggered, or the stopping test was met without loss of NSR quality.
  bool converged = false;
  /// Richardson only: residual grew on two consecutive steps.
  bool diverged = false;
};

struct RefinementResult {
  Vector x;
  RefinementReport report;
};

/// ||r - K x||_inf / (||K||_inf ||x||_inf); +infinity when the denominator is zero.
double nsr(const CsMatrix& k, std::span<const double> x, std::span<const double> r);

/// ||r - K x||_2 / (||K||_inf ||x||_2 + ||r||_2); +infinity when the denominator is zero.
double nrbe(const CsMatrix& k, std::span<const double> x, std::span<const double> r);

/// ||r - K x||_2 / ||r||_2.
double relative_residual(const CsMatrix& k, std::span<const double> x, std::span<const double> r);

/// True iff ||r - K x0||_2 > delta_tol ||r||_2.
bool needs_refinement(const CsMatrix& k, std::span<const double> x0, std::span<const double> r, double delta_tol);

/// FGMRES on K with the LU factors as right preconditioner, started at x0.
/// Returns x0 unchanged when no refinement is needed. On failure returns
/// whichever of x0 and the FGMRES iterate has the smaller residual.
RefinementResult refine_fgmres(const CsMatrix& k, const LuFactors& factors, std::span<const double> x0,
                               std::span<const double> r, const RefinementConfig& cfg);

/// Classical iterative refinement x <- x + LU^{-1}(r - K x). Returns the
/// iterate of smallest residual seen.
RefinementResult refine_richardson(const CsMatrix& k, const LuFactors& factors, std::span<const double> x0,
                                   std::span<const double> r, const RefinementConfig& cfg);

}  // namespace kktsolve
