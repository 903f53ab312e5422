#include <random>

#include <gtest/gtest.h>

#include "consynth/matgraph.hpp"

using namespace consynth;

namespace {

Matrix random_matrix(int r, int c, std::mt19937_64 & rng)
{
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) { m(i, j) = u(rng); }
  }
  return m;
}

Matrix ring_adjacency()
{
  Matrix a(3, 3);
  a << 0, 1, 0, 0, 0, 1, 1, 0, 0;
  return a;
}

}  // namespace

TEST(Kron, IdentityGivesBlockDiagonal)
{
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  const Matrix k = kron(Matrix::Identity(2, 2), m);
  Matrix expect = Matrix::Zero(4, 4);
  expect.topLeftCorner(2, 2) = m;
  expect.bottomRightCorner(2, 2) = m;
  EXPECT_EQ(k, expect);
}

TEST(Kron, MixedProductProperty)
{
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_matrix(2, 2, rng), b = random_matrix(2, 2, rng);
    const Matrix c = random_matrix(2, 2, rng), d = random_matrix(2, 2, rng);
    EXPECT_LT((kron(a, b) * kron(c, d) - kron(a * c, b * d)).norm(), 1e-13);
  }
}

TEST(Kron, Bilinearity)
{
  std::mt19937_64 rng(12);
  const Matrix a = random_matrix(2, 3, rng), a2 = random_matrix(2, 3, rng), b = random_matrix(3, 2, rng);
  const double s = 0.7;
  EXPECT_LT((kron(a + s * a2, b) - kron(a, b) - s * kron(a2, b)).norm(), 1e-13);
  EXPECT_LT((kron(b, a + s * a2) - kron(b, a) - s * kron(b, a2)).norm(), 1e-13);
}

TEST(Kron, RingLaplacianLiftHasZeroRowSums)
{
  const Matrix ln = kron(laplacian(ring_adjacency()), Matrix::Identity(4, 4));
  EXPECT_EQ(ln.rows(), 12);
  EXPECT_LT(ln.rowwise().sum().cwiseAbs().maxCoeff(), 1e-15);
}

TEST(BlockScale, IdentityPatternAndZeroPattern)
{
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  EXPECT_EQ(block_scale(Matrix::Identity(2, 2), {m, m}), block_diag({m, m}));
  EXPECT_EQ(block_scale(Matrix::Zero(2, 2), {m, m}), Matrix::Zero(4, 6));
}

TEST(BlockScale, MatchesKronProductWithBlockDiagonal)
{
  std::mt19937_64 rng(13);
  const Matrix l = laplacian(ring_adjacency());
  const Matrix lhat = l.topRows(2);
  const Matrix b = random_matrix(4, 1, rng);
  const Matrix p = random_matrix(4, 4, rng);
  std::vector<Matrix> d, k;
  for (int i = 0; i < 3; ++i) {
    d.push_back(random_matrix(1, 2, rng));
    k.push_back(p * b * d.back());
  }
  const Matrix direct = kron(Matrix::Identity(2, 2), p) * kron(lhat, Matrix::Identity(4, 4)) *
                        kron(Matrix::Identity(3, 3), b) * block_diag(d);
  EXPECT_LT((block_scale(lhat, k) - direct).norm(), 1e-12);
}

TEST(BlockScale, RejectsMismatchedBlocks)
{
  EXPECT_THROW(block_scale(Matrix::Identity(2, 2), {Matrix::Zero(2, 2), Matrix::Zero(3, 2)}), DimensionError);
  EXPECT_THROW(block_scale(Matrix::Identity(2, 2), {Matrix::Zero(2, 2)}), DimensionError);
}

TEST(Pinv, PenroseConditions)
{
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 25; ++trial) {
    const int r = 1 + trial % 5, c = 1 + (trial * 3) % 6;
    Matrix a = random_matrix(r, c, rng);
    if (trial % 4 == 0 && r > 1) { a.row(0) = a.row(1); }
    const Matrix x = pinv(a);
    const double s = std::max(1.0, a.norm());
    EXPECT_LT((a * x * a - a).norm(), 1e-12 * s);
    EXPECT_LT((x * a * x - x).norm(), 1e-12 * std::max(1.0, x.norm()));
    EXPECT_LT(((a * x).transpose() - a * x).norm(), 1e-12 * s);
    EXPECT_LT(((x * a).transpose() - x * a).norm(), 1e-12 * s);
  }
}

TEST(Pinv, ZeroAndRankDeficient)
{
  EXPECT_EQ(pinv(Matrix::Zero(2, 3)), Matrix::Zero(3, 2));
  Matrix c(2, 4);
  c << 1, 0, 0, 0, 0, 1, 0, 0;
  EXPECT_LT((pinv(c) - c.transpose()).norm(), 1e-15);
}

TEST(Pinv, RejectsNonFinite)
{
  Matrix a = Matrix::Ones(2, 2);
  a(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(pinv(a), NumericalError);
}

TEST(Eigen, SymmetricExtremesAndAbscissa)
{
  Matrix s(2, 2);
  s << 2, 1, 1, 2;
  EXPECT_NEAR(max_eig_sym(s), 3.0, 1e-14);
  EXPECT_NEAR(min_eig_sym(s), 1.0, 1e-14);
  Matrix ns(2, 2);
  ns << 0, 1, 0, 0;
  EXPECT_THROW(max_eig_sym(ns), NumericalError);
  Matrix a(2, 2);
  a << -1, 5, 0, -2;
  EXPECT_NEAR(spectral_abscissa(a), -1.0, 1e-14);
}

TEST(Laplacian, DirectedRingExact)
{
  Matrix expect(3, 3);
  expect << 1, -1, 0, 0, 1, -1, -1, 0, 1;
  EXPECT_EQ(laplacian(ring_adjacency()), expect);
}

TEST(Laplacian, RowSumsVanishForWeightedGraphs)
{
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int n = 2; n < 8; ++n) {
    Matrix a(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) { a(i, j) = i == j ? 0.0 : u(rng); }
    }
    EXPECT_LT(laplacian(a).rowwise().sum().cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Laplacian, RejectsBadAdjacency)
{
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = 1.0;
  EXPECT_THROW(laplacian(a), std::invalid_argument);
  a(0, 0) = 0.0;
  a(0, 1) = -1.0;
  EXPECT_THROW(laplacian(a), std::invalid_argument);
  EXPECT_THROW(laplacian(Matrix::Zero(2, 3)), DimensionError);
}

TEST(ReducedLaplacian, DropsLastRowWhenIndependent)
{
  const Matrix l = laplacian(ring_adjacency());
  const Matrix lh = reduce_laplacian(l);
  EXPECT_EQ(lh, l.topRows(2));
  EXPECT_EQ(numerical_rank(lh), 2);
}

TEST(ReducedLaplacian, SelectsIndependentRowsOtherwise)
{
  // agents 1 and 2 only listen to each other, so their rows are opposite
  Matrix a = Matrix::Zero(3, 3);
  a(0, 1) = a(1, 0) = 1.0;
  a(2, 0) = 1.0;
  const Matrix l = laplacian(a);
  const Matrix lh = reduce_laplacian(l);
  EXPECT_EQ(lh.rows(), 2);
  EXPECT_EQ(numerical_rank(lh), 2);
  EXPECT_NE(lh, l.topRows(2));
}

TEST(ReducedLaplacian, DisconnectedGraphThrows)
{
  Matrix a = Matrix::Zero(4, 4);
  a(0, 1) = a(1, 0) = 1.0;
  a(2, 3) = a(3, 2) = 1.0;
  EXPECT_THROW(reduce_laplacian(laplacian(a)), GraphError);
  const NetworkGraph g = NetworkGraph::from_adjacency(a);
  EXPECT_FALSE(g.connected);
}

TEST(ReducedLaplacian, SingleAgent)
{
  const Matrix lh = reduce_laplacian(Matrix::Zero(1, 1));
  EXPECT_EQ(lh.rows(), 0);
  EXPECT_EQ(lh.cols(), 1);
}

TEST(NetworkGraph, RingIsConnected)
{
  const NetworkGraph g = NetworkGraph::from_adjacency(ring_adjacency());
  EXPECT_TRUE(g.connected);
  EXPECT_EQ(g.n_agents, 3);
  EXPECT_EQ(g.reduced_laplacian.rows(), 2);
}
