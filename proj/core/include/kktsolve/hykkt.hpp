#pragma once

#include <array>
#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "kktsolve/cholesky.hpp"
#include "kktsolve/kkt.hpp"
#include "kktsolve/krylov.hpp"
#include "kktsolve/sparse.hpp"

namespace kktsolve {

struct HykktConfig {
  /// Augmentation weight; unset selects ||H~||_inf / max(||J||_inf^2, eps)
  /// clamped to [1, 1e12], evaluated on the scaled blocks of the first system.
  std::optional<double> gamma;
  double gamma_escalation = 10.0;
  /// Retries after the first failed Cholesky attempt.
  int max_escalations = 3;
  double cg_tol = 1e-12;
  Index cg_maxit = 1000;
  /// Ruiz sweeps on the 2x2 system at setup; 0 disables scaling.
  int ruiz_iters = 2;
  /// Recompute the scaling for every system instead of reusing the first one.
  bool rescale_each_system = false;
  ColumnOrdering ordering = ColumnOrdering::amd;
};

/// Stage names in reporting order. Setup stages run once per solver.
inline constexpr std::array<std::string_view, 15> kHykktStages = {
    "setup_parameters",           "setup_spgemm_htil",         "setup_solution_check",
    "setup_ruiz_scaling",         "setup_spgemm_hgamma",       "setup_permutation",
    "setup_hgamma_factorization", "setup_conjugate_gradient",  "compute_spgemm_htil",
    "compute_ruiz_scaling",       "compute_spgemm_hgamma",     "apply_permutation",
    "compute_hgamma_factorization", "compute_conjugate_gradient", "recover_solution",
};

/// Seconds per stage; every name of kHykktStages is present.
using StageTimings = std::map<std::string, double, std::less<>>;

struct GammaAttempt {
  double gamma = 0.0;
  bool success = false;
  /// Failed pivot, when !success.
  double pivot = 0.0;
};

struct HykktFactorReport {
  double gamma = 0.0;
  std::vector<GammaAttempt> attempts;
  double min_pivot = 0.0;
};

struct HykktSolution {
  Vector dx;
  Vector dlambda;
  Index cg_iterations = 0;
  bool converged = false;
  /// Relative CG residual on the scaled Schur system at exit.
  double cg_relative_residual = 0.0;
  std::uint64_t cholesky_solves = 0;
  double gamma = 0.0;
};

/// Augmented-Lagrangian KKT solver: Cholesky of H_gamma = H + D_x + gamma J^T J
/// and CG on S = J H_gamma^{-1} J^T. All patterns are frozen by setup().
class HykktSolver {
 public:
  /// Symbolic work on the first system: J^T, the H~ and H_gamma patterns,
  /// Ruiz scaling, AMD and symbolic Cholesky. Throws SingularMatrixError when
  /// J has an empty row.
  static HykktSolver setup(const CsMatrix& h, const CsMatrix& j, std::span<const double> dx_diag,
                           const HykktConfig& cfg = {});

  HykktSolver(const HykktSolver&) = delete;
  HykktSolver& operator=(const HykktSolver&) = delete;
  HykktSolver(HykktSolver&&) noexcept = default;
  HykktSolver& operator=(HykktSolver&&) noexcept = default;

  /// Numeric H~, H_gamma and Cholesky on the frozen patterns. On a
  /// nonpositive pivot gamma is multiplied by the escalation factor (0 goes
  /// to 1) and the factorization retried; the last successful gamma is kept
  /// for later systems. Throws NotSpdError when every attempt fails.
  HykktFactorReport factorize(const CsMatrix& h, const CsMatrix& j, std::span<const double> dx_diag);

  /// Solves [[H + D_x, J^T], [J, 0]] (dx, dlambda) = (r_x, r_lambda).
  HykktSolution solve(std::span<const double> r_x, std::span<const double> r_lambda);

  /// S v = J H_gamma^{-1} J^T v on the scaled blocks. One Cholesky solve.
  Vector schur_apply(std::span<const double> v) const;
  LinearOperator schur_operator() const;

  Index n() const noexcept { return n_; }
  Index m() const noexcept { return m_; }
  double gamma() const noexcept { return gamma_; }
  bool factorized() const noexcept { return chol_ != nullptr && factorized_; }
  const HykktConfig& config() const noexcept { return cfg_; }
  std::uint64_t cholesky_solve_count() const noexcept { return chol_ ? chol_->triangular_solve_count() : 0; }

  /// Scaling of the 2x2 system: first n entries scale x rows, the rest lambda rows.
  const RuizScaling& scaling() const noexcept { return ruiz_; }
  const PatternPtr& jt_pattern() const noexcept { return jt_.pattern_ptr(); }
  const PatternPtr& jtj_pattern() const noexcept { return jtj_pattern_; }
  const PatternPtr& htil_pattern() const noexcept { return htil_.pattern_ptr(); }
  const PatternPtr& hgamma_pattern() const noexcept { return hgamma_.pattern_ptr(); }
  const std::shared_ptr<const SymbolicChol>& chol_symbolic() const noexcept { return symbolic_; }
  /// Scaled H_gamma of the last factorization (symmetric-lower).
  const CsMatrix& hgamma() const noexcept { return hgamma_; }
  const CholFactors* cholesky() const noexcept { return chol_.get(); }

  /// Timings accumulated since the last take (setup stages appear once).
  const StageTimings& stage_timings() const noexcept { return timings_; }
  StageTimings take_stage_timings();

 private:
  HykktSolver() = default;
  void scale_values(const CsMatrix& h, const CsMatrix& j, std::span<const double> dx_diag);
  void check_shapes(const CsMatrix& h, const CsMatrix& j, std::span<const double> dx_diag) const;
  void add_time(std::string_view stage, std::chrono::steady_clock::time_point start);
  static StageTimings empty_timings();

  HykktConfig cfg_;
  Index n_ = 0;
  Index m_ = 0;
  PatternPtr h_pattern_;
  PatternPtr j_pattern_;

  std::unique_ptr<KktAssembler> kkt_;
  RuizScaling ruiz_;

  // Scaled blocks on frozen patterns.
  CsMatrix js_;
  CsMatrix jt_;
  std::vector<Index> jt_src_;
  CsMatrix htil_;  // symmetric-lower, H lower ∪ diagonal
  std::vector<Index> h_to_htil_;
  std::vector<Index> diag_htil_;
  PatternPtr jtj_pattern_;
  Vector jtj_vals_;
  CsMatrix hgamma_;  // symmetric-lower
  std::vector<Index> htil_to_hg_;
  std::vector<Index> jtj_to_hg_;  // -1 for upper entries

  std::shared_ptr<const SymbolicChol> symbolic_;
  std::unique_ptr<CholFactors> chol_;
  bool factorized_ = false;
  double gamma_ = 0.0;
  bool gamma_set_ = false;

  StageTimings timings_;
};

}  // namespace kktsolve
