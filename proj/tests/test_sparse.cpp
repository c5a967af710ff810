#include <gtest/gtest.h>

#include <numeric>

#include "kktsolve/error.hpp"
#include "kktsolve/sparse.hpp"
#include "support/oracle.hpp"

using namespace kktsolve;

namespace {

Permutation random_perm(oracle::Rng& rng, Index n) {
  std::vector<Index> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), Index{0});
  std::shuffle(p.begin(), p.end(), rng);
  return Permutation(std::move(p));
}

}  // namespace

TEST(FromTriplets, IdentityPattern) {
  Triplets t(2, 2);
  t.add(0, 0, 1.0);
  t.add(1, 1, 1.0);
  const CsMatrix a = from_triplets(t);
  EXPECT_EQ(a.nnz(), 2);
  EXPECT_EQ(a.pattern(), CsMatrix::identity(2).pattern());
}

TEST(FromTriplets, DuplicatesSummed) {
  Triplets t(1, 1);
  t.add(0, 0, 1.0);
  t.add(0, 0, 2.0);
  const CsMatrix a = from_triplets(t);
  ASSERT_EQ(a.nnz(), 1);
  EXPECT_EQ(a.values()[0], 3.0);
}

TEST(FromTriplets, OutOfRangeThrows) {
  Triplets t(2, 2);
  t.add(2, 0, 1.0);
  EXPECT_THROW(from_triplets(t), IndexError);
  Triplets u(2, 2);
  u.add(0, -1, 1.0);
  EXPECT_THROW(from_triplets(u), IndexError);
}

TEST(FromTriplets, UpperEntryInSymmetricLowerMirrored) {
  Triplets t(2, 2);
  t.add(0, 1, 1.0);
  t.add(1, 0, 2.0);
  const CsMatrix a = from_triplets(t, Symmetry::symmetric_lower);
  ASSERT_EQ(a.nnz(), 1);
  EXPECT_EQ(a.at(1, 0), 3.0);
}

TEST(CsMatrix, UpperEntryInSymmetricLowerStorageRejected) {
  auto pat = std::make_shared<SparsityPattern>(2, 2, std::vector<Index>{0, 1, 1}, std::vector<Index>{1});
  EXPECT_THROW(CsMatrix(pat, Vector{1.0}, Symmetry::symmetric_lower), PatternError);
}

TEST(FromTriplets, DenseRoundTrip) {
  oracle::Rng rng(1);
  const CsMatrix a = oracle::random_sparse(rng, 50, 50, 0.05);
  const Eigen::MatrixXd d = oracle::dense(a);
  const CsMatrix b = oracle::general_from_dense(d);
  EXPECT_EQ(oracle::dense(b), d);
  const std::vector<double> rm = a.to_dense();
  for (Index i = 0; i < 50; ++i)
    for (Index j = 0; j < 50; ++j) EXPECT_EQ(rm[static_cast<std::size_t>(i * 50 + j)], d(i, j));
  const CsMatrix c = from_dense(50, 50, rm);
  EXPECT_EQ(c.pattern(), a.pattern());
}

TEST(Spmv, Identity) {
  const Vector x{1.5, -2.0, 3.0};
  EXPECT_EQ(spmv(CsMatrix::identity(3), x), x);
}

TEST(Spmv, HandTwoByTwo) {
  const std::vector<double> d{2, 1, 0, 3};
  const CsMatrix a = from_dense(2, 2, d);
  EXPECT_EQ(spmv(a, Vector{1, 1}), (Vector{3, 3}));
  EXPECT_EQ(spmv(a, Vector{1, 1}, true), (Vector{2, 4}));
}

TEST(Spmv, DimensionMismatchThrows) {
  EXPECT_THROW(spmv(CsMatrix::identity(3), Vector{1, 2}), DimensionError);
}

TEST(Spmv, RandomMatchesDenseOracle) {
  oracle::Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const Index r = 1 + static_cast<Index>(rng() % 40);
    const Index c = 1 + static_cast<Index>(rng() % 40);
    const bool sym = trial % 3 == 0;
    const CsMatrix a = sym ? oracle::random_spd(rng, r, 0.2) : oracle::random_sparse(rng, r, c, 0.2);
    const Eigen::MatrixXd d = oracle::dense(a);
    const Vector x = oracle::random_vector(rng, a.cols());
    const Eigen::VectorXd ref = d * oracle::vec(x);
    const Eigen::VectorXd y = oracle::vec(spmv(a, x));
    const double scale = std::max(ref.norm(), 1e-300);
    EXPECT_LE((y - ref).norm() / scale, 1e-13) << "trial " << trial;
    const Vector xt = oracle::random_vector(rng, a.rows());
    const Eigen::VectorXd reft = d.transpose() * oracle::vec(xt);
    const Eigen::VectorXd yt = oracle::vec(spmv(a, xt, true));
    EXPECT_LE((yt - reft).norm() / std::max(reft.norm(), 1e-300), 1e-13) << "trial " << trial;
  }
}

TEST(Spmv, Linearity) {
  oracle::Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const CsMatrix a = oracle::random_sparse(rng, 30, 30, 0.2);
    const Vector x = oracle::random_vector(rng, 30);
    const Vector y = oracle::random_vector(rng, 30);
    const double alpha = oracle::uniform(rng, -3, 3);
    const double beta = oracle::uniform(rng, -3, 3);
    Vector combo(30);
    for (std::size_t i = 0; i < 30; ++i) combo[i] = alpha * x[i] + beta * y[i];
    const Eigen::VectorXd lhs = oracle::vec(spmv(a, combo));
    const Eigen::VectorXd rhs = alpha * oracle::vec(spmv(a, x)) + beta * oracle::vec(spmv(a, y));
    EXPECT_LE((lhs - rhs).norm(), 1e-12 * std::max(rhs.norm(), 1.0));
  }
}

TEST(Spgemm, IdentityTimesA) {
  oracle::Rng rng(4);
  const CsMatrix a = oracle::random_sparse(rng, 20, 20, 0.1);
  const CsMatrix p = spgemm(CsMatrix::identity(20), a);
  EXPECT_EQ(p.pattern(), a.pattern());
  EXPECT_TRUE(std::equal(p.values().begin(), p.values().end(), a.values().begin()));
}

TEST(Spgemm, JtJ) {
  const std::vector<double> jd{1, 1, 0, 0, 1, 1};
  const CsMatrix j = from_dense(2, 3, jd);
  const CsMatrix p = spgemm(transpose(j), j);
  Eigen::MatrixXd ref(3, 3);
  ref << 1, 1, 0, 1, 2, 1, 0, 1, 1;
  EXPECT_EQ(oracle::dense(p), ref);
}

TEST(Spgemm, RandomMatchesDenseOracle) {
  oracle::Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Index r = 1 + static_cast<Index>(rng() % 30);
    const Index k = 1 + static_cast<Index>(rng() % 30);
    const Index c = 1 + static_cast<Index>(rng() % 30);
    const CsMatrix a = trial % 4 == 0 ? oracle::random_spd(rng, k, 0.2) : oracle::random_sparse(rng, r, k, 0.2);
    const CsMatrix b = oracle::random_sparse(rng, a.cols(), c, 0.2);
    const Eigen::MatrixXd ref = oracle::dense(a) * oracle::dense(b);
    const Eigen::MatrixXd got = oracle::dense(spgemm(a, b));
    EXPECT_LE((got - ref).norm(), 1e-12 * std::max(ref.norm(), 1.0)) << "trial " << trial;
  }
}

TEST(Spgemm, SymbolicThenNumeric) {
  oracle::Rng rng(6);
  const CsMatrix a = oracle::random_sparse(rng, 15, 10, 0.3);
  const CsMatrix b = oracle::random_sparse(rng, 10, 12, 0.3);
  const PatternPtr pat = spgemm_symbolic(a, b);
  Vector vals(static_cast<std::size_t>(pat->nnz()));
  spgemm_numeric(a, b, *pat, vals);
  const CsMatrix p = spgemm(a, b);
  EXPECT_EQ(*pat, p.pattern());
  EXPECT_TRUE(std::equal(vals.begin(), vals.end(), p.values().begin()));
}

TEST(Spgemm, DimensionMismatchThrows) {
  EXPECT_THROW(spgemm(CsMatrix::identity(2), CsMatrix::identity(3)), DimensionError);
}

TEST(Transpose, Identity) {
  const CsMatrix t = transpose(CsMatrix::identity(4));
  EXPECT_EQ(t.pattern(), CsMatrix::identity(4).pattern());
}

TEST(Transpose, Rectangular) {
  const std::vector<double> jd{1, 2, 0, 0, 3, 4};
  const CsMatrix jt = transpose(from_dense(2, 3, jd));
  ASSERT_EQ(jt.rows(), 3);
  ASSERT_EQ(jt.cols(), 2);
  EXPECT_EQ(jt.at(0, 0), 1.0);
  EXPECT_EQ(jt.at(1, 0), 2.0);
  EXPECT_EQ(jt.at(1, 1), 3.0);
  EXPECT_EQ(jt.at(2, 1), 4.0);
  EXPECT_EQ(jt.nnz(), 4);
}

TEST(Transpose, Involution) {
  oracle::Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const CsMatrix a = oracle::random_sparse(rng, 1 + static_cast<Index>(rng() % 40),
                                             1 + static_cast<Index>(rng() % 40), 0.15);
    const CsMatrix tt = transpose(transpose(a));
    EXPECT_EQ(tt.pattern(), a.pattern());
    EXPECT_TRUE(std::equal(tt.values().begin(), tt.values().end(), a.values().begin(), a.values().end()));
  }
}

TEST(InfNorm, Identity) { EXPECT_EQ(inf_norm(CsMatrix::identity(5)), 1.0); }

TEST(InfNorm, Hand) {
  const std::vector<double> d{1, -2, 3, 4};
  EXPECT_EQ(inf_norm(from_dense(2, 2, d)), 7.0);
}

TEST(InfNorm, SymmetricLowerExpanded) {
  Triplets t(2, 2);
  t.add(0, 0, 1.0);
  t.add(1, 0, -2.0);
  t.add(1, 1, 0.5);
  EXPECT_EQ(inf_norm(from_triplets(t, Symmetry::symmetric_lower)), 3.0);
}

TEST(InfNorm, RandomMatchesDense) {
  oracle::Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const CsMatrix a = trial % 2 ? oracle::random_spd(rng, 25, 0.2) : oracle::random_sparse(rng, 25, 31, 0.2);
    const double ref = oracle::inf_norm(oracle::dense(a));
    EXPECT_NEAR(inf_norm(a), ref, 1e-15 * ref);
  }
}

TEST(Permutation, InverseConsistent) {
  oracle::Rng rng(9);
  const Permutation p = random_perm(rng, 17);
  for (Index i = 0; i < 17; ++i) EXPECT_EQ(p.inv_perm()[static_cast<std::size_t>(p[i])], i);
  EXPECT_EQ(p.inverse().inverse(), p);
  const Vector x = oracle::random_vector(rng, 17);
  EXPECT_EQ(p.apply_inverse(p.apply(x)), x);
}

TEST(Permutation, NonBijectionRejected) {
  EXPECT_THROW(Permutation(std::vector<Index>{0, 0, 1}), ConfigError);
  EXPECT_THROW(Permutation(std::vector<Index>{0, 3, 1}), ConfigError);
}

TEST(PermuteSymmetric, IdentityUnchanged) {
  oracle::Rng rng(10);
  const CsMatrix a = oracle::random_spd(rng, 12, 0.3);
  const CsMatrix b = permute_symmetric(a, Permutation::identity(12));
  EXPECT_EQ(b.pattern(), a.pattern());
  EXPECT_TRUE(std::equal(b.values().begin(), b.values().end(), a.values().begin()));
}

TEST(PermuteSymmetric, ReversalOfDiagonal) {
  const std::vector<double> d{1, 0, 0, 0, 2, 0, 0, 0, 3};
  const CsMatrix b = permute_symmetric(from_dense(3, 3, d, Symmetry::symmetric_lower),
                                       Permutation(std::vector<Index>{2, 1, 0}));
  EXPECT_EQ(b.at(0, 0), 3.0);
  EXPECT_EQ(b.at(1, 1), 2.0);
  EXPECT_EQ(b.at(2, 2), 1.0);
  EXPECT_EQ(b.nnz(), 3);
}

TEST(PermuteSymmetric, RandomMatchesDenseAndRoundTrips) {
  oracle::Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 2 + static_cast<Index>(rng() % 30);
    const CsMatrix a = trial % 2 ? oracle::random_spd(rng, n, 0.2) : oracle::random_sparse(rng, n, n, 0.2);
    const Permutation p = random_perm(rng, n);
    const CsMatrix b = permute_symmetric(a, p);
    EXPECT_EQ(b.symmetry(), a.symmetry());
    const Eigen::MatrixXd ad = oracle::dense(a);
    const Eigen::MatrixXd bd = oracle::dense(b);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) EXPECT_EQ(bd(i, j), ad(p[i], p[j]));
    const CsMatrix back = permute_symmetric(b, p.inverse());
    EXPECT_EQ(back.pattern(), a.pattern());
    EXPECT_TRUE(std::equal(back.values().begin(), back.values().end(), a.values().begin(), a.values().end()));
  }
}

TEST(PermuteSymmetric, NonSquareThrows) {
  oracle::Rng rng(12);
  EXPECT_THROW(permute_symmetric(oracle::random_sparse(rng, 3, 4, 0.5), Permutation::identity(3)),
               DimensionError);
}

TEST(Ruiz, EquilibratedFixedPoint) {
  const CsMatrix a = CsMatrix::identity(4);
  const RuizScaling s = ruiz_scale(a);
  EXPECT_LE(s.iterations_used, 1);
  EXPECT_TRUE(s.converged);
  for (double v : s.d) EXPECT_EQ(v, 1.0);
}

TEST(Ruiz, DiagonalClosedForm) {
  const std::vector<double> d{4, 0, 0, 16};
  const CsMatrix a = from_dense(2, 2, d, Symmetry::symmetric_lower);
  const RuizScaling s = ruiz_scale(a);
  EXPECT_DOUBLE_EQ(s.d[0], 0.5);
  EXPECT_DOUBLE_EQ(s.d[1], 0.25);
  const CsMatrix scaled = scale_symmetric(a, s.d);
  EXPECT_DOUBLE_EQ(scaled.at(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(scaled.at(1, 1), 1.0);
}

TEST(Ruiz, RandomSpdPostCondition) {
  oracle::Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const CsMatrix k = oracle::random_spd(rng, 40, 0.1);
    const RuizScaling s = ruiz_scale(k, 20, 1e-2);
    for (double v : s.d) EXPECT_GT(v, 0.0);
    const Vector norms = row_inf_norms(scale_symmetric(k, s.d));
    for (double v : norms) {
      EXPECT_GE(v, 0.99);
      EXPECT_LE(v, 1.0 + 1e-12);
    }
    if (s.converged) {
      for (double v : norms) EXPECT_LE(std::abs(v - 1.0), 1e-2);
    }
  }
}

TEST(Ruiz, ZeroRowThrows) {
  Triplets t(2, 2);
  t.add(0, 0, 1.0);
  const CsMatrix a = from_triplets(t, Symmetry::symmetric_lower);
  EXPECT_THROW(ruiz_scale(a), SingularMatrixError);
}

TEST(Pattern, ImmutableUnderValueUpdates) {
  oracle::Rng rng(14);
  CsMatrix a = oracle::random_sparse(rng, 20, 20, 0.2);
  const std::vector<Index> rp(a.row_ptr().begin(), a.row_ptr().end());
  const std::vector<Index> ci(a.col_idx().begin(), a.col_idx().end());
  const PatternPtr before = a.pattern_ptr();
  a.set_values(Vector(static_cast<std::size_t>(a.nnz()), 2.0));
  a.values()[0] = 5.0;
  const CsMatrix b = a.with_values(Vector(static_cast<std::size_t>(a.nnz()), 1.0));
  EXPECT_EQ(a.pattern_ptr(), before);
  EXPECT_EQ(b.pattern_ptr(), before);
  EXPECT_TRUE(std::equal(rp.begin(), rp.end(), a.row_ptr().begin()));
  EXPECT_TRUE(std::equal(ci.begin(), ci.end(), a.col_idx().begin()));
  EXPECT_THROW(a.set_values(Vector(3, 1.0)), DimensionError);
}

TEST(Pattern, AtExpandsSymmetricAndChecksBounds) {
  Triplets t(3, 3);
  t.add(2, 0, 7.0);
  const CsMatrix a = from_triplets(t, Symmetry::symmetric_lower);
  EXPECT_EQ(a.at(2, 0), 7.0);
  EXPECT_EQ(a.at(0, 2), 7.0);
  EXPECT_EQ(a.at(1, 1), 0.0);
  EXPECT_THROW(a.at(3, 0), IndexError);
}

TEST(Pattern, ExpandAndLowerTriangle) {
  oracle::Rng rng(15);
  const CsMatrix s = oracle::random_spd(rng, 15, 0.2);
  const CsMatrix full = expand_symmetric(s);
  EXPECT_EQ(full.symmetry(), Symmetry::general);
  EXPECT_EQ(oracle::dense(full), oracle::dense(s));
  const CsMatrix lower = lower_triangle(full);
  EXPECT_EQ(lower.pattern(), s.pattern());
}
