#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "kktsolve/sparse.hpp"

namespace kktsolve {

class LuFactors;
class CholFactors;

/// A square linear map applied as out = Op(in).
struct LinearOperator {
  Index dim = 0;
  std::function<void(std::span<const double> in, std::span<double> out)> apply;

  Vector operator()(std::span<const double> in) const {
    Vector out(static_cast<std::size_t>(dim));
    apply(in, out);
    return out;
  }
};

LinearOperator identity_operator(Index n);
LinearOperator matrix_operator(const CsMatrix& a);
/// v -> (LU)^{-1} v; every application counts one triangular solve.
LinearOperator lu_operator(const LuFactors& factors);
LinearOperator chol_operator(const CholFactors& factors);

enum class Orthogonalization { cgs2, mgs };

struct KrylovConfig {
  /// Restart length m of FGMRES(m).
  Index restart = 10;
  /// Total inner-iteration budget across restarts.
  Index max_iterations = 100;
  /// Relative tolerance on the estimated residual, ||rho_i|| <= tol ||rho_0||.
  double tol = 1e-10;
  Orthogonalization ortho = Orthogonalization::cgs2;
};

struct KrylovResult {
  Vector x;
  Index iterations = 0;
  bool converged = false;
  /// Residual norm estimates; entry 0 is the initial residual norm and each
  /// restart appends its recomputed true residual.
  Vector est_residual_history;
  /// ||b - K x||_2 from an explicit product at exit.
  double true_final_residual = 0.0;
  /// Initial residual norm ||b - K x0||_2.
  double initial_residual = 0.0;
  Index precond_applications = 0;
  Index restarts = 0;
  /// FGMRES only: (estimate, true residual) at the end of each cycle.
  std::vector<std::pair<double, double>> cycle_checks;
};

/// Result of one Gram-Schmidt pass against an orthonormal basis.
struct OrthoStep {
  Vector h;
  Vector w;
  double norm = 0.0;
  /// w lies numerically in span(V): ||w_new|| <= 1e-14 ||w||.
  bool breakdown = false;
};

/// Classical Gram-Schmidt with one full reorthogonalization pass.
/// `basis` holds `count` vectors of length n, stored contiguously.
OrthoStep cgs2_step(std::span<const double> basis, Index count, std::span<const double> w);
OrthoStep mgs_step(std::span<const double> basis, Index count, std::span<const double> w);

/// Restarted flexible GMRES with right preconditioning.
///
/// Z_j = M v_j is stored so the preconditioner may change between
/// iterations. The residual norm comes from the Givens recurrence; the
/// iterate is only formed at a restart or on convergence. Throws Error if
/// an operator produces a non-finite vector.
KrylovResult fgmres(const LinearOperator& k, const LinearOperator& m, std::span<const double> b,
                    std::span<const double> x0, const KrylovConfig& cfg);

/// Conjugate gradients on the recurrence residual, converged when
/// ||r|| <= tol ||b - S x0||. Throws NotSpdError when p^T S p <= 0.
KrylovResult cg(const LinearOperator& s, std::span<const double> b, std::span<const double> x0, double tol,
                Index maxit);

}  // namespace kktsolve
