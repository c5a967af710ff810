#include <gtest/gtest.h>

#include "kktsolve/error.hpp"
#include "kktsolve/kkt.hpp"
#include "kktsolve/lu.hpp"
#include "support/oracle.hpp"
#include "support/standard_trace.hpp"

using namespace kktsolve;

namespace {

KktBlocks random_blocks(oracle::Rng& rng, Index n, Index m, double density) {
  oracle::KktInstance inst = oracle::random_kkt(rng, n, m, density);
  KktBlocks b;
  b.H = std::move(inst.H);
  b.J = std::move(inst.J);
  b.x = oracle::random_vector(rng, n, 0.1, 2.0);
  b.z = oracle::random_vector(rng, n, 0.1, 2.0);
  b.mu = oracle::uniform(rng, 1e-3, 1.0);
  return b;
}

// Dense unreduced Newton matrix [[H, J^T, -I], [J, 0, 0], [Z, 0, X]].
Eigen::MatrixXd dense_full(const KktBlocks& b) {
  const Index n = b.n();
  const Index m = b.m();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(2 * n + m, 2 * n + m);
  const Eigen::MatrixXd jd = oracle::dense(b.J);
  k.topLeftCorner(n, n) = oracle::dense(b.H);
  k.block(0, n, n, m) = jd.transpose();
  k.block(0, n + m, n, n) = -Eigen::MatrixXd::Identity(n, n);
  k.block(n, 0, m, n) = jd;
  k.block(n + m, 0, n, n) = oracle::vec(b.z).asDiagonal();
  k.block(n + m, n + m, n, n) = oracle::vec(b.x).asDiagonal();
  return k;
}

}  // namespace

TEST(AssembleKkt, HandOneByOne) {
  KktBlocks b;
  b.H = CsMatrix::identity(1);
  b.J = CsMatrix::identity(1);
  b.x = {1.0};
  b.z = {1.0};
  b.mu = 0.1;
  const KktSystem s = assemble_kkt(b);
  Eigen::MatrixXd ref(2, 2);
  ref << 2, 1, 1, 0;
  EXPECT_EQ(oracle::dense(s.K), ref);
  EXPECT_TRUE(s.K.is_symmetric_lower());
  EXPECT_EQ(s.dx_diag, (Vector{1.0}));
}

TEST(AssembleKkt, DxDiag) {
  KktBlocks b;
  b.H = CsMatrix::identity(1);
  b.J = CsMatrix::identity(1);
  b.x = {2.0};
  b.z = {4.0};
  EXPECT_EQ(assemble_kkt(b).dx_diag, (Vector{2.0}));
}

TEST(AssembleKkt, BlocksMatchDefinition) {
  oracle::Rng rng(81);
  for (int trial = 0; trial < 10; ++trial) {
    const KktBlocks b = random_blocks(rng, 30, 10, 0.1);
    const KktSystem s = assemble_kkt(b);
    Vector dx(30);
    for (std::size_t i = 0; i < 30; ++i) dx[i] = b.z[i] / b.x[i];
    const Eigen::MatrixXd ref = oracle::dense_kkt(b.H, b.J, dx);
    EXPECT_LE((oracle::dense(s.K) - ref).lpNorm<Eigen::Infinity>(), 1e-15 * ref.lpNorm<Eigen::Infinity>());
    // Trailing block structurally zero; diagonal present for every primal row.
    for (Index i = 30; i < 40; ++i)
      for (Index j = 30; j <= i; ++j) EXPECT_LT(s.K.pattern().find(i, j), 0);
    for (Index i = 0; i < 30; ++i) EXPECT_GE(s.K.pattern().find(i, i), 0);
  }
}

TEST(AssembleKkt, SymmetricExactly) {
  oracle::Rng rng(82);
  const KktBlocks b = random_blocks(rng, 25, 8, 0.15);
  const Eigen::MatrixXd k = oracle::dense(assemble_kkt(b).K);
  EXPECT_EQ(k, k.transpose());
  const CsMatrix full = expand_symmetric(assemble_kkt(b).K);
  const CsMatrix ft = transpose(full);
  EXPECT_EQ(full.pattern(), ft.pattern());
  EXPECT_TRUE(std::equal(full.values().begin(), full.values().end(), ft.values().begin()));
}

TEST(AssembleKkt, GeneralStorageHReadsLowerTriangle) {
  oracle::Rng rng(83);
  KktBlocks b = random_blocks(rng, 12, 4, 0.2);
  const KktSystem ref = assemble_kkt(b);
  b.H = expand_symmetric(b.H);
  EXPECT_EQ(oracle::dense(assemble_kkt(b).K), oracle::dense(ref.K));
}

TEST(AssembleKkt, NonpositiveIterateRejected) {
  KktBlocks b;
  b.H = CsMatrix::identity(2);
  b.J = CsMatrix::identity(2);
  b.x = {1.0, 0.0};
  b.z = {1.0, 1.0};
  EXPECT_THROW(assemble_kkt(b), ConfigError);
  b.x = {1.0, 1.0};
  b.z = {-1.0, 1.0};
  EXPECT_THROW(assemble_kkt(b), ConfigError);
}

TEST(KktAssembler, ReusesPatternAndRejectsMismatch) {
  oracle::Rng rng(84);
  const KktBlocks b = random_blocks(rng, 20, 6, 0.15);
  const KktAssembler asmb(b.H, b.J);
  const KktSystem s1 = asmb.assemble(b);
  KktBlocks b2 = b;
  b2.H = b.H.with_values(oracle::random_vector(rng, b.H.nnz()));
  b2.x = oracle::random_vector(rng, 20, 0.5, 1.0);
  const KktSystem s2 = asmb.assemble(b2);
  EXPECT_EQ(s1.K.pattern_ptr(), s2.K.pattern_ptr());
  EXPECT_EQ(s1.K.pattern_ptr(), asmb.pattern());
  const KktBlocks other = random_blocks(rng, 20, 6, 0.3);
  EXPECT_THROW(asmb.assemble(other.H, b.J, s1.dx_diag), PatternError);
  EXPECT_THROW(asmb.assemble(b.H, other.J, s1.dx_diag), PatternError);
}

TEST(KktAssembler, TracePatternShared) {
  const auto& tr = oracle::standard_trace();
  ASSERT_GE(tr.systems.size(), 9u);
  for (const auto& s : tr.systems) EXPECT_EQ(s.system.K.pattern_ptr(), tr.systems.front().system.K.pattern_ptr());
}

TEST(AssembleRhs, DegenerateAndCancellation) {
  KktBlocks b;
  b.H = CsMatrix::identity(3);
  b.J = CsMatrix::identity(3);
  const Vector rt{1.5, -2.0, 0.25};
  const Vector rl{0, 0, 0};
  b.x = {1.0, 2.0, 3.0};
  b.z = {0.0, 0.0, 0.0};
  b.mu = 0.0;
  EXPECT_EQ(assemble_rhs(b, rt, rl, rl).r_x, rt);
  b.x = {1, 1, 1};
  b.z = {1, 1, 1};
  b.mu = 1.0;
  EXPECT_EQ(assemble_rhs(b, rt, rl, rl).r_x, rt);
}

TEST(AssembleRhs, RandomFormula) {
  oracle::Rng rng(85);
  const KktBlocks b = random_blocks(rng, 40, 10, 0.1);
  const Vector rt = oracle::random_vector(rng, 40);
  const Vector rl = oracle::random_vector(rng, 10);
  const Vector rz = oracle::random_vector(rng, 40);
  const KktRhs rhs = assemble_rhs(b, rt, rl, rz);
  for (std::size_t i = 0; i < 40; ++i) {
    const double ref = rt[i] + b.z[i] - b.mu / b.x[i];
    EXPECT_NEAR(rhs.r_x[i], ref, 1e-15 * std::max(1.0, std::abs(ref)));
  }
  Vector stacked = rhs.r_x;
  stacked.insert(stacked.end(), rl.begin(), rl.end());
  EXPECT_EQ(rhs.stacked(), stacked);
  EXPECT_THROW(assemble_rhs(b, rl, rl, rz), DimensionError);
}

TEST(RecoverDz, Examples) {
  KktBlocks b;
  b.H = CsMatrix::identity(2);
  b.J = CsMatrix::identity(2);
  b.x = {2.0, 4.0};
  b.z = {3.0, 5.0};
  const Vector rz{1.0, 2.0};
  EXPECT_EQ(recover_dz(b, rz, Vector{0, 0}), (Vector{0.5, 0.5}));
  const Vector dx{0.5, -1.0};
  const Vector zdx{1.5, -5.0};
  EXPECT_EQ(recover_dz(b, zdx, dx), (Vector{0.0, 0.0}));
}

TEST(RecoverDz, ThirdRowResidual) {
  oracle::Rng rng(86);
  const KktBlocks b = random_blocks(rng, 30, 5, 0.1);
  const Vector rz = oracle::random_vector(rng, 30);
  const Vector dx = oracle::random_vector(rng, 30);
  const Vector dz = recover_dz(b, rz, dx);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_LE(std::abs(b.z[i] * dx[i] + b.x[i] * dz[i] - rz[i]), 1e-13);
}

TEST(Reduction, ConsistentWithFullNewtonSystem) {
  oracle::Rng rng(87);
  for (int trial = 0; trial < 25; ++trial) {
    const Index n = 5 + static_cast<Index>(rng() % 40);
    const Index m = 1 + static_cast<Index>(rng() % std::max<Index>(1, n / 3));
    const KktBlocks b = random_blocks(rng, n, m, 0.15);
    const Vector rt = oracle::random_vector(rng, n);
    const Vector rl = oracle::random_vector(rng, m);
    Vector rz(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < rz.size(); ++i) rz[i] = b.x[i] * b.z[i] - b.mu;
    const KktSystem s = assemble_kkt(b);
    const KktRhs rhs = assemble_rhs(b, rt, rl, rz);
    const auto [f, d] = lu_factorize(s.K);
    const Vector sol = lu_solve(f, rhs.stacked());
    const Vector dx(sol.begin(), sol.begin() + n);
    const Vector dl(sol.begin() + n, sol.end());
    for (DzRecovery variant : {DzRecovery::complementarity, DzRecovery::stationarity}) {
      const Vector dz = recover_dz(b, rhs, dx, dl, variant);
      Eigen::VectorXd u(2 * n + m), rhs_full(2 * n + m);
      u << oracle::vec(dx), oracle::vec(dl), oracle::vec(dz);
      rhs_full << oracle::vec(rt), oracle::vec(rl), oracle::vec(rz);
      const Eigen::VectorXd res = dense_full(b) * u - rhs_full;
      EXPECT_LE(res.norm() / rhs_full.norm(), 1e-10) << "trial " << trial;
    }
  }
}

TEST(GammaRhs, Examples) {
  oracle::Rng rng(88);
  const KktBlocks b = random_blocks(rng, 15, 5, 0.2);
  const Vector rx = oracle::random_vector(rng, 15);
  const Vector rl = oracle::random_vector(rng, 5);
  EXPECT_EQ(gamma_rhs(b.J, rx, rl, 0.0), rx);
  EXPECT_EQ(gamma_rhs(b.J, rx, Vector(5, 0.0), 7.0), rx);
  const double g = 3.5;
  const Eigen::VectorXd ref = oracle::vec(rx) + g * oracle::dense(b.J).transpose() * oracle::vec(rl);
  EXPECT_LE((oracle::vec(gamma_rhs(b.J, rx, rl, g)) - ref).lpNorm<Eigen::Infinity>(), 1e-14 * ref.lpNorm<Eigen::Infinity>());
}

TEST(GammaAugmentation, SolutionUnchanged) {
  oracle::Rng rng(89);
  for (int trial = 0; trial < 15; ++trial) {
    const KktBlocks b = random_blocks(rng, 30, 10, 0.15);
    const KktSystem s = assemble_kkt(b);
    const Vector rx = oracle::random_vector(rng, 30);
    const Vector rl = oracle::random_vector(rng, 10);
    Vector rhs = rx;
    rhs.insert(rhs.end(), rl.begin(), rl.end());
    const auto [f, d] = lu_factorize(s.K);
    const Eigen::VectorXd ref = oracle::vec(lu_solve(f, rhs));
    for (double gamma : {1.0, 10.0, 100.0}) {
      // [[H + D_x + gamma J^T J, J^T], [J, 0]] with r_x + gamma J^T r_lambda.
      Eigen::MatrixXd kg = oracle::dense(s.K);
      const Eigen::MatrixXd jd = oracle::dense(b.J);
      kg.topLeftCorner(30, 30) += gamma * jd.transpose() * jd;
      const CsMatrix kgs = oracle::sym_from_dense(kg);
      Vector rg = gamma_rhs(b.J, rx, rl, gamma);
      rg.insert(rg.end(), rl.begin(), rl.end());
      const auto [fg, dg] = lu_factorize(kgs);
      EXPECT_LE(oracle::rel2(oracle::vec(lu_solve(fg, rg)), ref), 1e-8) << "gamma " << gamma;
    }
  }
}
