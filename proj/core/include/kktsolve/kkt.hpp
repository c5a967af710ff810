#pragma once

#include "kktsolve/sparse.hpp"

namespace kktsolve {

/// Blocks of one interior-point Newton system.
struct KktBlocks {
  /// n x n symmetric Hessian of the Lagrangian (symmetric-lower, or general
  /// storage of which only the lower triangle is read).
  CsMatrix H;
  /// m x n constraint Jacobian.
  CsMatrix J;
  /// Primal iterate, strictly positive.
  Vector x;
  /// Bound multipliers, strictly positive.
  Vector z;
  double mu = 0.0;

  Index n() const noexcept { return H.rows(); }
  Index m() const noexcept { return J.rows(); }
};

/// Reduced symmetric system [[H + D_x, J^T], [J, 0]] in symmetric-lower storage.
struct KktSystem {
  CsMatrix K;
  KktBlocks blocks;
  /// D_x = X^{-1} Z
  Vector dx_diag;

  Index n() const noexcept { return blocks.n(); }
  Index m() const noexcept { return blocks.m(); }
};

struct KktRhs {
  Vector r_x;
  Vector r_lambda;
  Vector r_z;
  Vector r_tilde_x;

  /// (r_x, r_lambda), the right-hand side of the reduced system.
  Vector stacked() const;
};

/// Builds the reduced KKT pattern once and refills values for every later
/// system with the same H and J patterns.
class KktAssembler {
 public:
  KktAssembler(const CsMatrix& h, const CsMatrix& j);

  const PatternPtr& pattern() const noexcept { return pattern_; }
  Index n() const noexcept { return n_; }
  Index m() const noexcept { return m_; }

  /// Symmetric-lower K for the given values. Throws PatternError when H or J
  /// differs structurally from the constructor arguments.
  CsMatrix assemble(const CsMatrix& h, const CsMatrix& j, std::span<const double> dx_diag) const;

  /// Validates x, z > 0 and assembles with D_x = z / x.
  KktSystem assemble(const KktBlocks& blocks) const;

 private:
  Index n_;
  Index m_;
  PatternPtr h_pattern_;
  PatternPtr j_pattern_;
  PatternPtr pattern_;
  std::vector<Index> h_slot_;  // -1 for ignored upper entries of general H
  std::vector<Index> diag_slot_;
  std::vector<Index> j_slot_;
};

/// One-off assembly (fresh pattern).
KktSystem assemble_kkt(const KktBlocks& blocks);

/// r_x = r_tilde_x + z - mu X^{-1} e; r_z is stored for the later Dz recovery.
KktRhs assemble_rhs(const KktBlocks& blocks, std::span<const double> r_tilde_x, std::span<const double> r_lambda,
                    std::span<const double> r_z);

enum class DzRecovery {
  /// Dz = X^{-1} (r_z - Z Dx)
  complementarity,
  /// Dz = H Dx + J^T Dlambda - r_tilde_x
  stationarity,
};

Vector recover_dz(const KktBlocks& blocks, std::span<const double> r_z, std::span<const double> dx);

Vector recover_dz(const KktBlocks& blocks, const KktRhs& rhs, std::span<const double> dx,
                  std::span<const double> dlambda, DzRecovery variant);

/// r_x + gamma J^T r_lambda
Vector gamma_rhs(const CsMatrix& j, std::span<const double> r_x, std::span<const double> r_lambda, double gamma);

}  // namespace kktsolve
