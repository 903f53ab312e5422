#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "consynth/lmi.hpp"

using namespace consynth;

namespace {

Vector random_vector(int n, std::mt19937_64 & rng)
{
  std::normal_distribution<double> g(0.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) { v(i) = g(rng); }
  return v;
}

struct Small
{
  VariableLayout layout;
  int p = 0, f = 0, s = 0;
  Small()
  {
    p = layout.add_symmetric("P", 3);
    f = layout.add_full("F", 2, 3);
    s = layout.add_scalar("tau");
  }
};

}  // namespace

TEST(VariableLayout, CountsAndOffsets)
{
  Small sm;
  EXPECT_EQ(sm.layout.n_scalars(), 6 + 6 + 1);
  EXPECT_EQ(sm.layout.block(sm.f).offset, 6);
  EXPECT_EQ(sm.layout.index(sm.s, 0, 0), 12);
  EXPECT_EQ(sm.layout.find("F"), sm.f);
  EXPECT_FALSE(sm.layout.contains("G"));
}

TEST(VariableLayout, SymmetricIndexIsBijective)
{
  VariableLayout l;
  const int id = l.add_symmetric("S", 5);
  std::vector<int> seen(15, 0);
  for (int i = 0; i < 5; ++i) {
    for (int j = i; j < 5; ++j) { ++seen[static_cast<std::size_t>(l.index(id, i, j))]; }
  }
  for (int c : seen) { EXPECT_EQ(c, 1); }
  EXPECT_EQ(l.index(id, 3, 1), l.index(id, 1, 3));
}

TEST(VariableLayout, PackUnpackRoundTrip)
{
  Small sm;
  std::mt19937_64 rng(1);
  const Vector x = random_vector(sm.layout.n_scalars(), rng);
  const auto values = sm.layout.unpack(x);
  EXPECT_EQ(sm.layout.pack(values), x);
  const Matrix p = values.at("P");
  EXPECT_EQ(p, p.transpose());
}

TEST(VariableLayout, DuplicateNameRejected)
{
  VariableLayout l;
  l.add_scalar("a");
  EXPECT_THROW(l.add_scalar("a"), std::invalid_argument);
}

TEST(AffineMatrix, EvaluationMatchesDirectAlgebra)
{
  Small sm;
  std::mt19937_64 rng(2);
  Matrix a = Matrix::Random(3, 3), b = Matrix::Random(3, 2);
  const AffineMatrix p = AffineMatrix::variable(sm.layout, sm.p);
  const AffineMatrix f = AffineMatrix::variable(sm.layout, sm.f);
  const AffineMatrix e = a.transpose() * p + p * a + 2.0 * (b * f) -
                         AffineMatrix::scalar_times(sm.layout.index(sm.s, 0, 0), Matrix::Identity(3, 3));
  for (int trial = 0; trial < 5; ++trial) {
    const Vector x = random_vector(sm.layout.n_scalars(), rng);
    const Matrix pv = sm.layout.value(x, sm.p), fv = sm.layout.value(x, sm.f);
    const double tau = x(sm.layout.index(sm.s, 0, 0));
    const Matrix direct = a.transpose() * pv + pv * a + 2.0 * b * fv - tau * Matrix::Identity(3, 3);
    EXPECT_LT((e.evaluate(x) - direct).norm(), 1e-12);
    EXPECT_LT((e.transpose().evaluate(x) - direct.transpose()).norm(), 1e-12);
  }
}

TEST(AffineMatrix, FromBlocksAndBlockDiag)
{
  Small sm;
  std::mt19937_64 rng(3);
  const AffineMatrix p = AffineMatrix::variable(sm.layout, sm.p);
  const AffineMatrix f = AffineMatrix::variable(sm.layout, sm.f);
  const AffineMatrix grid = AffineMatrix::from_blocks({{p, f.transpose()}, {f, AffineMatrix::zero(2, 2)}});
  const AffineMatrix diag = AffineMatrix::block_diag({p, AffineMatrix(Matrix::Identity(2, 2))});
  const Vector x = random_vector(sm.layout.n_scalars(), rng);
  const Matrix pv = sm.layout.value(x, sm.p), fv = sm.layout.value(x, sm.f);
  Matrix expect(5, 5);
  expect << pv, fv.transpose(), fv, Matrix::Zero(2, 2);
  EXPECT_LT((grid.evaluate(x) - expect).norm(), 1e-14);
  Matrix expect_diag = Matrix::Zero(5, 5);
  expect_diag.topLeftCorner(3, 3) = pv;
  expect_diag.bottomRightCorner(2, 2).setIdentity();
  EXPECT_LT((diag.evaluate(x) - expect_diag).norm(), 1e-14);
}

TEST(AffineMatrix, FromBlocksRejectsRaggedGrid)
{
  EXPECT_THROW(AffineMatrix::from_blocks({{AffineMatrix::zero(2, 2), AffineMatrix::zero(3, 2)}}), DimensionError);
}

TEST(Pencil, FromAffineEvaluatesIdentically)
{
  Small sm;
  std::mt19937_64 rng(4);
  const AffineMatrix p = AffineMatrix::variable(sm.layout, sm.p);
  const AffineMatrix m = p - AffineMatrix(Matrix::Identity(3, 3));
  LmiProblem prob;
  prob.n_vars = sm.layout.n_scalars();
  prob.objective = Vector::Zero(prob.n_vars);
  prob.pencils.push_back(Pencil::from_affine("p", m));
  prob.validate();
  const Vector x = random_vector(prob.n_vars, rng);
  EXPECT_LT((evaluate_pencil(prob, 0, x) - m.evaluate(x)).norm(), 1e-14);
  EXPECT_NEAR(max_constraint_violation(prob, x), max_eig_sym(m.evaluate(x)), 1e-12);
}

TEST(LmiProblem, ExportImportRoundTrip)
{
  Small sm;
  std::mt19937_64 rng(5);
  const AffineMatrix p = AffineMatrix::variable(sm.layout, sm.p);
  const AffineMatrix f = AffineMatrix::variable(sm.layout, sm.f);
  Matrix a(3, 3);
  a << -1.1, 0.3, 0, 0.25, -2, 1e-17, 0, 1.0 / 3.0, -0.5;
  LmiProblem prob;
  prob.n_vars = sm.layout.n_scalars();
  prob.var_names = sm.layout.scalar_names();
  prob.objective = Vector::Zero(prob.n_vars);
  prob.objective(0) = 1.0 / 7.0;
  prob.pencils.push_back(Pencil::from_affine("lyap", a.transpose() * p + p * a));
  prob.pencils.push_back(Pencil::from_affine("mixed", AffineMatrix::from_blocks({{-1.0 * p, f.transpose()}, {f, AffineMatrix(-Matrix::Identity(2, 2))}})));
  prob.apply_relative_margin(1e-6);
  Matrix eq = Matrix::Zero(1, prob.n_vars);
  eq(0, 3) = 1.0;
  prob.add_equalities(eq, Vector::Constant(1, 0.1));
  std::stringstream ss;
  export_problem(prob, ss);
  const LmiProblem back = import_problem(ss);
  ASSERT_EQ(back.n_vars, prob.n_vars);
  ASSERT_EQ(back.pencils.size(), prob.pencils.size());
  EXPECT_EQ(back.objective, prob.objective);
  EXPECT_EQ(back.var_names, prob.var_names);
  EXPECT_EQ(back.eq_a, prob.eq_a);
  EXPECT_EQ(back.eq_b, prob.eq_b);
  for (std::size_t i = 0; i < prob.pencils.size(); ++i) {
    EXPECT_EQ(back.pencils[i].name, prob.pencils[i].name);
    EXPECT_EQ(back.pencils[i].margin, prob.pencils[i].margin);
    for (int trial = 0; trial < 3; ++trial) {
      const Vector x = random_vector(prob.n_vars, rng);
      EXPECT_EQ(evaluate_pencil(back, static_cast<int>(i), x), evaluate_pencil(prob, static_cast<int>(i), x));
    }
  }
}

TEST(LmiProblem, ImportRejectsGarbage)
{
  std::stringstream ss("consynth-lmi 2\n");
  EXPECT_THROW(import_problem(ss), std::invalid_argument);
  std::stringstream trunc("consynth-lmi 1\nvars 2\nvar 0 a\n");
  EXPECT_ANY_THROW(import_problem(trunc));
}

TEST(LmiProblem, WithSlackShiftsEveryPencil)
{
  LmiProblem prob;
  prob.n_vars = 1;
  prob.objective = Vector::Ones(1);
  Pencil p;
  p.name = "a";
  p.f0 = Matrix::Identity(2, 2);
  p.terms.push_back({0, Matrix::Identity(2, 2)});
  prob.pencils.push_back(p);
  const LmiProblem s = with_slack(prob, {}, -1.0);
  ASSERT_EQ(s.n_vars, 2);
  EXPECT_EQ(s.objective, (Vector(2) << 0, 1).finished());
  Vector x(2);
  x << 0.5, 2.0;
  EXPECT_LT((evaluate_pencil(s, 0, x) - (1.5 - 2.0) * Matrix::Identity(2, 2)).norm(), 1e-15);
  const int lb = s.pencil_index("slack_lower_bound");
  ASSERT_GE(lb, 0);
  EXPECT_NEAR(evaluate_pencil(s, lb, x)(0, 0), -1.0 - 2.0, 1e-15);
}

TEST(LmiProblem, ValidateCatchesAsymmetry)
{
  LmiProblem prob;
  prob.n_vars = 0;
  prob.objective = Vector::Zero(0);
  Pencil p;
  p.name = "bad";
  p.f0 = (Matrix(2, 2) << 0, 1, 0, 0).finished();
  prob.pencils.push_back(p);
  EXPECT_THROW(prob.validate(), NumericalError);
}
