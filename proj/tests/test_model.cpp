#include <cmath>

#include <gtest/gtest.h>

#include "consynth/manipulator.hpp"

using namespace consynth;

TEST(Manipulator, BundledMatrices)
{
  const Matrix a = manipulator::a_bar();
  EXPECT_EQ(a(1, 0), -48.6);
  EXPECT_EQ(a(3, 2), -19.5);
  EXPECT_EQ(manipulator::b()(1, 0), 21.6);
  Matrix l(3, 3);
  l << 1, -1, 0, 0, 1, -1, -1, 0, 1;
  EXPECT_EQ(manipulator::system().graph.laplacian, l);
}

TEST(Nonlinearity, SineMatchesModel)
{
  const AgentModel ag = manipulator::agent();
  Vector x(4);
  x << 0.1, 0.2, 0.7, -0.4;
  const Vector h = ag.nonlinearity(0.0, x);
  EXPECT_DOUBLE_EQ(h(3), -3.33 * std::sin(0.7));
  EXPECT_EQ(h.head(3), Vector::Zero(3));
}

TEST(Nonlinearity, RejectsOutOfRangeIndex)
{
  NonlinearitySpec s = manipulator::nonlinearity();
  s.source = 4;
  EXPECT_THROW(make_nonlinearity(s, 4), DimensionError);
}

TEST(QuadraticBound, HoldsOnSampledStates)
{
  const AgentModel ag = manipulator::agent();
  const auto samples = sample_states(4, 20000, 10.0, 20.0, 3);
  const QuadraticBoundReport r = check_quadratic_bound(ag, samples);
  EXPECT_EQ(r.samples, 20000u);
  EXPECT_EQ(r.violations, 0u);
  EXPECT_LE(r.max_ratio, 1.0);
}

TEST(QuadraticBound, ViolatedWhenBoundTooSmall)
{
  AgentModel ag = manipulator::agent();
  ag.alpha_bar = 1.0;
  const QuadraticBoundReport r = check_quadratic_bound(ag, sample_states(4, 1000, 1.0, 1.0, 4));
  EXPECT_GT(r.violations, 0u);
}

TEST(SampleStates, Deterministic)
{
  const auto a = sample_states(3, 10, 1.0, 1.0, 9);
  const auto b = sample_states(3, 10, 1.0, 1.0, 9);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].x, b[i].x);
    EXPECT_EQ(a[i].t, b[i].t);
  }
}

TEST(AssembleGlobal, KroneckerStructure)
{
  const MultiAgentSystem mas = manipulator::system();
  EXPECT_EQ(mas.global_a, kron(Matrix::Identity(3, 3), manipulator::a_bar()));
  EXPECT_EQ(mas.global_c, kron(Matrix::Identity(3, 3), manipulator::c_bar()));
  EXPECT_EQ(mas.global_b.rows(), 12);
  EXPECT_EQ(mas.global_b.cols(), 3);
}

TEST(AssembleGlobal, RejectsHeterogeneousDrift)
{
  std::vector<AgentModel> agents(3, manipulator::agent());
  agents[1].a_bar(0, 0) = 1.0;
  EXPECT_THROW(assemble_global(agents, NetworkGraph::from_adjacency(manipulator::adjacency())), std::invalid_argument);
}

TEST(AssembleGlobal, WarnsOnUncontrollablePair)
{
  std::vector<AgentModel> agents(3, manipulator::agent());
  for (auto & a : agents) { a.b = Matrix::Zero(4, 1); }
  const MultiAgentSystem mas = assemble_global(agents, NetworkGraph::from_adjacency(manipulator::adjacency()));
  EXPECT_FALSE(mas.warnings.empty());
}

TEST(RankTests, ControllableAndObservable)
{
  EXPECT_TRUE(is_controllable(manipulator::a_bar(), manipulator::b()));
  EXPECT_TRUE(is_observable(manipulator::a_bar(), manipulator::c_bar()));
  EXPECT_FALSE(is_controllable(Matrix::Identity(2, 2), Matrix::Zero(2, 1)));
}

TEST(AgentModel, ValidateRejectsBadShapes)
{
  AgentModel ag = manipulator::agent();
  ag.b = Matrix::Zero(3, 1);
  EXPECT_THROW(ag.validate(), DimensionError);
  ag = manipulator::agent();
  ag.alpha_bar = 0.0;
  EXPECT_THROW(ag.validate(), std::invalid_argument);
}

TEST(DesignWeights, ScaledIdentity)
{
  const DesignWeights w = DesignWeights::scaled_identity(1.0, 2.0, 3, 4, 2);
  ASSERT_EQ(w.r.size(), 2u);
  ASSERT_EQ(w.q.size(), 3u);
  EXPECT_EQ(w.q[0], 2.0 * Matrix::Identity(2, 2));
  DesignWeights bad = w;
  bad.r[0] = -Matrix::Identity(4, 4);
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(ControllerRealization, ValidateShapes)
{
  ControllerRealization c;
  c.order = 2;
  for (int i = 0; i < 3; ++i) {
    c.a_c.push_back(Matrix::Zero(2, 2));
    c.b_c.push_back(Matrix::Zero(2, 2));
    c.c_c.push_back(Matrix::Zero(1, 2));
    c.d_c.push_back(Matrix::Zero(1, 2));
  }
  EXPECT_NO_THROW(c.validate(3, 1, 2));
  c.b_c[2] = Matrix::Zero(2, 3);
  EXPECT_THROW(c.validate(3, 1, 2), DimensionError);
}

TEST(AggregationCondition, IdentityBlocks)
{
  NonlinearityBound nb;
  nb.per_agent_h = {Matrix::Identity(4, 4), Matrix::Identity(4, 4)};
  nb.gamma = {1.0, 1.0};
  nb.h_hat = Matrix::Identity(8, 8);
  Matrix hbar_stack = kron(Matrix::Identity(3, 3), manipulator::h_bar());
  EXPECT_TRUE(check_aggregation_condition(nb, hbar_stack, {3.33, 3.33, 3.33}));
}
