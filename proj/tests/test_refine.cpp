#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "kktsolve/error.hpp"
#include "kktsolve/lu.hpp"
#include "kktsolve/refine.hpp"
#include "support/oracle.hpp"
#include "support/standard_trace.hpp"

using namespace kktsolve;

namespace {

CsMatrix diag(std::initializer_list<double> d) {
  Triplets t(static_cast<Index>(d.size()), static_cast<Index>(d.size()));
  Index i = 0;
  for (double v : d) {
    t.add(i, i, v);
    ++i;
  }
  return from_triplets(t);
}

double oracle_nsr(const Eigen::MatrixXd& k, const Eigen::VectorXd& x, const Eigen::VectorXd& r) {
  return (r - k * x).lpNorm<Eigen::Infinity>() / (oracle::inf_norm(k) * x.lpNorm<Eigen::Infinity>());
}

double oracle_nrbe(const Eigen::MatrixXd& k, const Eigen::VectorXd& x, const Eigen::VectorXd& r) {
  return (r - k * x).norm() / (oracle::inf_norm(k) * x.norm() + r.norm());
}

// Stale factors: the first system of the trace refactorized with a late system.
struct StaleSetup {
  const CsMatrix* k;
  Vector r;
  LuFactors factors;
  Vector x0;
};

StaleSetup stale(std::size_t index) {
  const auto& tr = oracle::standard_trace();
  auto [f, d] = lu_factorize(tr.systems.front().system.K);
  const auto& sys = tr.systems.at(index);
  lu_refactorize(f, sys.system.K);
  Vector r = sys.rhs.stacked();
  Vector x0 = lu_solve(f, r);
  return {&sys.system.K, std::move(r), std::move(f), std::move(x0)};
}

}  // namespace

TEST(Nsr, ExactSolutionZero) {
  const CsMatrix i2 = CsMatrix::identity(2);
  EXPECT_EQ(nsr(i2, Vector{3, 4}, Vector{3, 4}), 0.0);
  EXPECT_EQ(nrbe(i2, Vector{3, 4}, Vector{3, 4}), 0.0);
}

TEST(Nsr, Hand) { EXPECT_EQ(nsr(CsMatrix::identity(2), Vector{1, 0}, Vector{1, 1}), 1.0); }

TEST(Nsr, ZeroDenominatorIsInfinite) {
  EXPECT_EQ(nsr(CsMatrix::identity(2), Vector{0, 0}, Vector{1, 1}), std::numeric_limits<double>::infinity());
}

TEST(Nrbe, Hand) { EXPECT_EQ(nrbe(CsMatrix::identity(2), Vector{0, 0}, Vector{3, 4}), 1.0); }

TEST(Nsr, RandomAgainstIndependentQuotient) {
  oracle::Rng rng(71);
  for (int trial = 0; trial < 20; ++trial) {
    const CsMatrix k = oracle::random_nonsingular(rng, 50, 0.1, 1.2);
    const Eigen::MatrixXd kd = oracle::dense(k);
    const Vector r = oracle::random_vector(rng, 50);
    const Eigen::VectorXd x = oracle::dense_solve(kd, oracle::vec(r));
    const Vector xs = oracle::stdvec(x);
    const double mine = nsr(k, xs, r);
    EXPECT_LE(mine, 1e-12);
    EXPECT_NEAR(mine, oracle_nsr(kd, x, oracle::vec(r)), 1e-3 * mine + 1e-30);
    const Vector xp = oracle::random_vector(rng, 50);
    const double a = nrbe(k, xp, r);
    const double b = oracle_nrbe(kd, oracle::vec(xp), oracle::vec(r));
    EXPECT_NEAR(a, b, 1e-15 * b);
    EXPECT_NEAR(nsr(k, xp, r), oracle_nsr(kd, oracle::vec(xp), oracle::vec(r)), 1e-14);
  }
}

TEST(NeedsRefinement, Examples) {
  const CsMatrix i2 = CsMatrix::identity(2);
  EXPECT_FALSE(needs_refinement(i2, Vector{1, 2}, Vector{1, 2}, 1e-10));
  EXPECT_TRUE(needs_refinement(i2, Vector{0, 0}, Vector{1, 2}, 0.5));
  EXPECT_DOUBLE_EQ(relative_residual(i2, Vector{0, 0}, Vector{1, 2}), 1.0);
}

TEST(NeedsRefinement, TriggeredOnStaleTrace) {
  const auto& tr = oracle::standard_trace();
  bool any = false;
  for (std::size_t i = 1; i < tr.systems.size(); ++i) {
    const StaleSetup s = stale(i);
    any = any || needs_refinement(*s.k, s.x0, s.r, 1e-10);
  }
  EXPECT_TRUE(any);
}

TEST(RefineFgmres, UntriggeredReturnsInput) {
  const CsMatrix i3 = CsMatrix::identity(3);
  const auto [f, d] = lu_factorize(i3);
  const Vector r{1, 2, 3};
  const RefinementResult res = refine_fgmres(i3, f, r, r, {});
  EXPECT_FALSE(res.report.triggered);
  EXPECT_EQ(res.report.ir_iterations, 0);
  EXPECT_EQ(res.report.nsr_after, res.report.nsr_before);
  EXPECT_EQ(res.report.triangular_solves_used, 0u);
  EXPECT_TRUE(res.report.converged);
  EXPECT_EQ(res.x, r);
  EXPECT_EQ(f.triangular_solve_count(), 0u);
}

TEST(RefineFgmres, FreshFactorsEarlySystemsUntriggered) {
  const auto& tr = oracle::standard_trace();
  RefinementConfig cfg;
  cfg.delta_tol = 1e-9;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& sys = tr.systems[i];
    const auto [f, d] = lu_factorize(sys.system.K);
    const Vector r = sys.rhs.stacked();
    const Vector x0 = lu_solve(f, r);
    const RefinementResult res = refine_fgmres(sys.system.K, f, x0, r, cfg);
    EXPECT_FALSE(res.report.triggered) << "system " << i;
    EXPECT_EQ(res.report.ir_iterations, 0);
  }
}

TEST(RefineFgmres, StaleLateSystemImproved) {
  const auto& tr = oracle::standard_trace();
  StaleSetup s = stale(tr.systems.size() - 1);
  RefinementConfig cfg;
  cfg.delta_tol = 1e-10;
  const std::uint64_t before = s.factors.triangular_solve_count();
  const RefinementResult res = refine_fgmres(*s.k, s.factors, s.x0, s.r, cfg);
  ASSERT_TRUE(res.report.triggered);
  EXPECT_TRUE(res.report.converged);
  EXPECT_LE(res.report.nsr_after, 1e-12);
  EXPECT_LT(res.report.nsr_after, res.report.nsr_before);
  EXPECT_LE(res.report.rr_final, cfg.delta_tol);
  EXPECT_EQ(res.report.triangular_solves_used, s.factors.triangular_solve_count() - before);
  EXPECT_EQ(res.report.triangular_solves_used, static_cast<std::uint64_t>(res.report.ir_iterations));
  EXPECT_DOUBLE_EQ(res.report.nsr_after, nsr(*s.k, res.x, s.r));
  EXPECT_DOUBLE_EQ(res.report.rr_final, relative_residual(*s.k, res.x, s.r));
  EXPECT_DOUBLE_EQ(res.report.nrbe_final, nrbe(*s.k, res.x, s.r));
}

TEST(RefineFgmres, MonotoneQualityAndCounting) {
  oracle::Rng rng(72);
  for (int trial = 0; trial < 20; ++trial) {
    const CsMatrix k = oracle::random_nonsingular(rng, 60, 0.08, trial % 2 ? 0.3 : 1.0);
    Vector v(k.values().begin(), k.values().end());
    for (double& x : v) x *= 1.0 + 1e-2 * oracle::uniform(rng);
    const auto [f, d] = lu_factorize(k.with_values(v));
    const Vector r = oracle::random_vector(rng, 60);
    const Vector x0 = lu_solve(f, r);
    RefinementConfig cfg;
    cfg.delta_tol = 1e-12;
    const std::uint64_t c0 = f.triangular_solve_count();
    const RefinementResult res = refine_fgmres(k, f, x0, r, cfg);
    EXPECT_EQ(res.report.triangular_solves_used, f.triangular_solve_count() - c0);
    if (res.report.converged) {
      EXPECT_LE(res.report.nsr_after, res.report.nsr_before);
      EXPECT_LE(res.report.rr_final, cfg.delta_tol);
    }
    if (!res.report.triggered) {
      EXPECT_EQ(res.report.ir_iterations, 0);
    }
  }
}

TEST(RefineFgmres, FailureReturnsBetterIterate) {
  oracle::Rng rng(73);
  const CsMatrix k = oracle::random_nonsingular(rng, 60, 0.1, 0.3);
  Vector v(k.values().begin(), k.values().end());
  for (double& x : v) x *= 1.0 + 0.5 * oracle::uniform(rng);
  const auto [f, d] = lu_factorize(k.with_values(v));
  const Vector r = oracle::random_vector(rng, 60);
  const Vector x0 = lu_solve(f, r);
  RefinementConfig cfg;
  cfg.delta_tol = 1e-15;
  cfg.krylov.max_iterations = 2;
  cfg.krylov.restart = 2;
  const RefinementResult res = refine_fgmres(k, f, x0, r, cfg);
  EXPECT_TRUE(res.report.triggered);
  EXPECT_FALSE(res.report.converged);
  EXPECT_LE(norm2(residual(k, res.x, r)), norm2(residual(k, x0, r)));
}

TEST(RefineRichardson, ExactStartZeroIterations) {
  const CsMatrix k = diag({2, 4});
  const auto [f, d] = lu_factorize(k);
  const RefinementResult res = refine_richardson(k, f, Vector{1, 1}, Vector{2, 4}, {});
  EXPECT_FALSE(res.report.triggered);
  EXPECT_EQ(res.report.ir_iterations, 0);
  EXPECT_EQ(res.report.nsr_after, res.report.nsr_before);
  EXPECT_TRUE(res.report.converged);
}

TEST(RefineRichardson, PerturbedDiagonalFactors) {
  const CsMatrix k = diag({1.0, 1e-8});
  // U values off by 1e-6 relative.
  const auto [f, d] = lu_factorize(diag({1.0 * (1 + 1e-6), 1e-8 * (1 - 1e-6)}));
  const Vector r{1.0, 1.0};
  const Vector x0 = lu_solve(f, r);
  RefinementConfig cfg;
  cfg.delta_tol = 1e-14;
  const RefinementResult rich = refine_richardson(k, f, x0, r, cfg);
  const RefinementResult fg = refine_fgmres(k, f, x0, r, cfg);
  EXPECT_TRUE(rich.report.triggered);
  EXPECT_TRUE(rich.report.converged);
  EXPECT_FALSE(rich.report.diverged);
  EXPECT_TRUE(fg.report.converged);
  EXPECT_LE(rich.report.nsr_after, 1e-14);
  EXPECT_LE(fg.report.nsr_after, 1e-14);
  EXPECT_GE(rich.report.ir_iterations, 2);
  EXPECT_LE(fg.report.ir_iterations, 2);
  EXPECT_EQ(rich.report.triangular_solves_used, static_cast<std::uint64_t>(rich.report.ir_iterations));
  EXPECT_NEAR(rich.x[1], 1e8, 1e-4);
}

TEST(RefineRichardson, DivergenceReturnsBest) {
  // Factors of K / 3 overshoot: the error is multiplied by -2 each step.
  const CsMatrix k = diag({3.0, 6.0, 9.0});
  const auto [f, d] = lu_factorize(diag({1.0, 2.0, 3.0}));
  const Vector r{3, 6, 9};
  const Vector x0{1.1, 0.9, 1.05};
  const RefinementResult res = refine_richardson(k, f, x0, r, {});
  EXPECT_TRUE(res.report.triggered);
  EXPECT_TRUE(res.report.diverged);
  EXPECT_FALSE(res.report.converged);
  EXPECT_EQ(res.report.ir_iterations, 2);
  EXPECT_EQ(res.x, x0);
  EXPECT_EQ(res.report.nsr_after, res.report.nsr_before);
}

TEST(RefineRichardson, NsrRatioStopsOnStagnation) {
  const auto& tr = oracle::standard_trace();
  StaleSetup s = stale(tr.systems.size() - 1);
  RefinementConfig cfg;
  cfg.delta_tol = 1e-10;
  cfg.richardson_stop = RichardsonStop::nsr_ratio;
  cfg.richardson_max_steps = 50;
  const RefinementResult res = refine_richardson(*s.k, s.factors, s.x0, s.r, cfg);
  EXPECT_TRUE(res.report.triggered);
  EXPECT_LT(res.report.ir_iterations, 50);
  EXPECT_LE(res.report.nsr_after, res.report.nsr_before);
}

TEST(RefineRichardson, CountingAndBudget) {
  oracle::Rng rng(74);
  for (int trial = 0; trial < 10; ++trial) {
    const CsMatrix k = oracle::random_nonsingular(rng, 50, 0.1, 0.8);
    Vector v(k.values().begin(), k.values().end());
    for (double& x : v) x *= 1.0 + 1e-2 * oracle::uniform(rng);
    const auto [f, d] = lu_factorize(k.with_values(v));
    const Vector r = oracle::random_vector(rng, 50);
    const Vector x0 = lu_solve(f, r);
    RefinementConfig cfg;
    cfg.delta_tol = 1e-13;
    cfg.richardson_max_steps = 4;
    const std::uint64_t c0 = f.triangular_solve_count();
    const RefinementResult res = refine_richardson(k, f, x0, r, cfg);
    EXPECT_LE(res.report.ir_iterations, 4);
    EXPECT_EQ(res.report.triangular_solves_used, f.triangular_solve_count() - c0);
    EXPECT_EQ(res.report.triangular_solves_used, static_cast<std::uint64_t>(res.report.ir_iterations));
    if (res.report.converged) {
      EXPECT_LE(res.report.nsr_after, res.report.nsr_before);
      EXPECT_LE(res.report.rr_final, cfg.delta_tol);
    }
  }
}

TEST(Refine, ConfigAndDimensionsValidated) {
  const CsMatrix i2 = CsMatrix::identity(2);
  const auto [f, d] = lu_factorize(i2);
  RefinementConfig cfg;
  cfg.delta_tol = 0.0;
  EXPECT_THROW(refine_fgmres(i2, f, Vector{0, 0}, Vector{1, 1}, cfg), ConfigError);
  EXPECT_THROW(refine_richardson(i2, f, Vector{0, 0}, Vector{1, 1}, cfg), ConfigError);
  EXPECT_THROW(nsr(i2, Vector{0}, Vector{1, 1}), DimensionError);
  EXPECT_EQ(to_string(RefinementMethod::fgmres), "fgmres");
}
