#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "kktsolve/kkt.hpp"
#include "kktsolve/sparse.hpp"

namespace kktsolve {

/// min 1/2 x^T Q x + c^T x  s.t.  A x = b, x >= 0.
struct QpModel {
  /// Symmetric-lower.
  CsMatrix Q;
  Vector c;
  CsMatrix A;
  Vector b;
  std::uint64_t seed = 0;

  Index n() const noexcept { return Q.rows(); }
  Index m() const noexcept { return A.rows(); }
};

/// Random convex QP: Q = B^T B + 1e-4 I with sparse random B, A with a
/// diagonally dominant leading m x m block plus random fill, b = A e, c
/// uniform in (-1, 1). Deterministic for a given seed on every platform.
QpModel make_qp(Index n, Index m, double density, std::uint64_t seed);

struct QpResiduals {
  /// Q x + c + A^T lambda - z
  Vector r_tilde_x;
  /// A x - b
  Vector r_lambda;
  /// X Z e - mu e
  Vector r_z;
};

QpResiduals qp_residuals(const QpModel& qp, std::span<const double> x, std::span<const double> lambda,
                         std::span<const double> z, double mu);

struct BarrierOptions {
  /// Fraction-to-boundary parameter.
  double tau = 0.995;
  /// Consecutive backtracking halvings before the trace is truncated.
  int max_rejections = 20;
  /// Newton steps taken per barrier value; only the first system is emitted.
  int newton_steps_per_mu = 1;
  /// Dense condition estimates are computed when n + m is at most this.
  Index condition_limit = 600;
};

struct TraceSystem {
  KktSystem system;
  KktRhs rhs;
  double mu = 0.0;
  std::optional<double> condition_estimate;
};

struct BarrierTrace {
  std::vector<TraceSystem> systems;
  Vector mu_schedule;
  /// Newton step rejected max_rejections times; systems stop there.
  bool truncated = false;
  Vector x;
  Vector lambda;
  Vector z;
};

/// Short-step primal-dual barrier method from x = e, z = mu_start e,
/// lambda = 0. At each of `steps` barrier values mu_start * mu_factor^k the
/// reduced KKT system is emitted, then a damped Newton step is taken. Every
/// emitted K shares one pattern object.
BarrierTrace barrier_sequence(const QpModel& qp, double mu_start, double mu_factor, int steps,
                              const BarrierOptions& options = {});

/// 2-norm condition number of the logical matrix via a dense SVD.
double dense_condition_number(const CsMatrix& a);

/// Writes system_XXX.mtx / rhs_XXX.mtx per system and manifest.json into
/// `dir`. Returns the manifest path.
std::filesystem::path export_trace(const BarrierTrace& trace, const std::filesystem::path& dir,
                                   const std::string& name);

}  // namespace kktsolve
