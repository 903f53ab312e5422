#include <cmath>

#include <gtest/gtest.h>

#include "consynth/analysis.hpp"
#include "consynth/manipulator.hpp"

using namespace consynth;

namespace {

MultiAgentSystem scalar_system(const Matrix & a, int n_agents = 2)
{
  const int n = static_cast<int>(a.rows());
  AgentModel ag;
  ag.a_bar = a;
  ag.b = Matrix::Zero(n, 1);
  ag.b(n - 1, 0) = 1.0;
  ag.c_bar = Matrix::Identity(n, n);
  ag.h_bar = Matrix::Identity(n, n);
  Matrix adj = Matrix::Zero(n_agents, n_agents);
  for (int i = 0; i < n_agents; ++i) { adj(i, (i + 1) % n_agents) = 1.0; }
  return assemble_global(std::vector<AgentModel>(static_cast<std::size_t>(n_agents), ag), NetworkGraph::from_adjacency(adj));
}

ControllerRealization zero_static(int n_agents, int m, int q)
{
  ControllerRealization c;
  for (int i = 0; i < n_agents; ++i) {
    c.a_c.push_back(Matrix(0, 0));
    c.b_c.push_back(Matrix(0, q));
    c.c_c.push_back(Matrix(m, 0));
    c.d_c.push_back(Matrix::Zero(m, q));
  }
  return c;
}

SimConfig quiet(double horizon, double dt)
{
  SimConfig cfg;
  cfg.horizon = horizon;
  cfg.dt = dt;
  cfg.disturbance.kind = DisturbanceSpec::Kind::kNone;
  cfg.nonlinearity = false;
  return cfg;
}

ControllerRealization damped_dynamic()
{
  ControllerRealization c;
  c.order = 2;
  for (int i = 0; i < 3; ++i) {
    c.a_c.push_back(-Matrix::Identity(2, 2));
    c.b_c.push_back(0.1 * Matrix::Identity(2, 2));
    c.c_c.push_back(Matrix::Zero(1, 2));
    c.d_c.push_back((Matrix(1, 2) << -0.2, -0.05).finished());
  }
  return c;
}

double oscillator_error(Integrator integ, double dt)
{
  Matrix a(2, 2);
  a << 0, 1, -1, 0;
  const MultiAgentSystem mas = scalar_system(a);
  SimConfig cfg = quiet(2.0, dt);
  cfg.integrator = integ;
  cfg.initial_states = {(Vector(2) << 1, 0).finished(), (Vector(2) << 0, 1).finished()};
  const Trajectory tr = simulate(mas, zero_static(2, 1, 2), cfg);
  const double t = tr.times.back();
  const Vector exact = (Vector(2) << std::cos(t), -std::sin(t)).finished();
  return (tr.agent_state(tr.size() - 1, 0) - exact).norm();
}

}  // namespace

TEST(Simulate, ExponentialDecay)
{
  const MultiAgentSystem mas = scalar_system(Matrix::Constant(1, 1, -1.0));
  SimConfig cfg = quiet(1.0, 1e-3);
  cfg.initial_states = {Vector::Constant(1, 2.0), Vector::Constant(1, -1.0)};
  const Trajectory tr = simulate(mas, zero_static(2, 1, 1), cfg);
  ASSERT_EQ(tr.size(), 1001u);
  EXPECT_EQ(tr.status, SimStatus::kCompleted);
  for (std::size_t k = 0; k < tr.size(); k += 100) {
    EXPECT_NEAR(tr.x[k](0), 2.0 * std::exp(-tr.times[k]), 1e-12);
    EXPECT_NEAR(tr.x[k](1), -std::exp(-tr.times[k]), 1e-12);
  }
}

TEST(Simulate, Rk4ConvergenceOrder)
{
  const double e1 = oscillator_error(Integrator::kRk4, 0.02);
  const double e2 = oscillator_error(Integrator::kRk4, 0.01);
  EXPECT_GE(std::log2(e1 / e2), 3.5);
  const double f1 = oscillator_error(Integrator::kEuler, 0.02);
  const double f2 = oscillator_error(Integrator::kEuler, 0.01);
  EXPECT_NEAR(std::log2(f1 / f2), 1.0, 0.2);
}

TEST(Simulate, SeedDeterminism)
{
  const MultiAgentSystem mas = manipulator::system();
  SimConfig cfg;
  cfg.horizon = 0.5;
  cfg.perturbations = builtin_perturbations(2, 2, 1, manipulator::bounds());
  cfg.seed = 7;
  const Trajectory a = simulate(mas, damped_dynamic(), cfg);
  const Trajectory b = simulate(mas, damped_dynamic(), cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    ASSERT_EQ(a.x[k], b.x[k]);
    ASSERT_EQ(a.xi[k], b.xi[k]);
  }
  cfg.seed = 8;
  const Trajectory c = simulate(mas, damped_dynamic(), cfg);
  EXPECT_NE(a.x.front(), c.x.front());
  EXPECT_NE(a.xi[3], c.xi[3]);
}

TEST(Simulate, InitialStatesInRange)
{
  SimConfig cfg;
  cfg.horizon = 0.01;
  cfg.init_half_width = 0.5;
  const Trajectory tr = simulate(manipulator::system(), damped_dynamic(), cfg);
  EXPECT_LE(tr.x.front().cwiseAbs().maxCoeff(), 0.5);
  EXPECT_EQ(tr.x_c.front(), Vector::Zero(6));
}

TEST(Simulate, ConsensusSubspaceIsInvariant)
{
  // identical agents from identical states see zero coupled output
  SimConfig cfg;
  cfg.horizon = 2.0;
  cfg.identical_init = true;
  cfg.disturbance.kind = DisturbanceSpec::Kind::kNone;
  cfg.perturbations = builtin_perturbations(2, 2, 1, manipulator::bounds());
  const Trajectory tr = simulate(manipulator::system(), damped_dynamic(), cfg);
  const auto e = consensus_error(tr);
  EXPECT_EQ(e.front(), 0.0);
  EXPECT_LT(*std::max_element(e.begin(), e.end()), 1e-12);
  EXPECT_LT(tr.x_c.back().norm(), 1e-12);
}

TEST(Simulate, RecordEveryKeepsLastSample)
{
  SimConfig cfg = quiet(0.1, 1e-3);
  cfg.record_every = 30;
  const Trajectory tr = simulate(manipulator::system(), damped_dynamic(), cfg);
  ASSERT_EQ(tr.size(), 5u);
  EXPECT_NEAR(tr.times[1], 0.03, 1e-15);
  EXPECT_NEAR(tr.times.back(), 0.1, 1e-12);
}

TEST(Simulate, DivergenceStopsRun)
{
  const MultiAgentSystem mas = scalar_system(Matrix::Constant(1, 1, 50.0));
  SimConfig cfg = quiet(5.0, 1e-3);
  cfg.initial_states = {Vector::Constant(1, 1.0), Vector::Constant(1, 1.0)};
  const Trajectory tr = simulate(mas, zero_static(2, 1, 1), cfg);
  EXPECT_EQ(tr.status, SimStatus::kDiverged);
  EXPECT_GT(tr.x.back().cwiseAbs().maxCoeff(), 1e9);
  EXPECT_LT(tr.times.back(), 1.0);
}

TEST(Simulate, RejectsBadConfig)
{
  SimConfig cfg;
  cfg.dt = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = SimConfig{};
  cfg.initial_states = {Vector::Zero(4)};
  EXPECT_THROW(simulate(manipulator::system(), damped_dynamic(), cfg), DimensionError);
}

TEST(Disturbance, MomentsAndMask)
{
  DisturbanceSpec spec;
  spec.variance = 4.0;
  spec.channels = {1, 0, 1, 1};
  const Matrix w = sample_disturbance(spec, 3, 4, 20000, 11);
  ASSERT_EQ(w.rows(), 20000);
  ASSERT_EQ(w.cols(), 12);
  for (int c = 0; c < 12; ++c) {
    const Vector col = w.col(c);
    if (c % 4 == 1) {
      EXPECT_EQ(col.cwiseAbs().maxCoeff(), 0.0);
      continue;
    }
    const double mean = col.mean();
    const double var = (col.array() - mean).square().sum() / static_cast<double>(col.size() - 1);
    EXPECT_NEAR(mean, 0.0, 0.06);
    EXPECT_NEAR(var, 4.0, 0.2);
  }
  EXPECT_EQ(sample_disturbance(spec, 3, 4, 10, 11), sample_disturbance(spec, 3, 4, 10, 11));
}

TEST(Disturbance, NoneIsZero)
{
  DisturbanceSpec spec;
  spec.kind = DisturbanceSpec::Kind::kNone;
  EXPECT_EQ(sample_disturbance(spec, 2, 3, 5, 1), Matrix::Zero(5, 6));
  spec.channels = {1};
  EXPECT_THROW(spec.validate(3), DimensionError);
}

TEST(Perturbations, ValuesAtTimeZero)
{
  const PerturbationSignals s = builtin_perturbations(2, 2, 1, manipulator::bounds());
  EXPECT_LT((s.delta_ac(0, 0.0) - (Matrix(2, 2) << 0, 0, 0, 0.5).finished()).norm(), 1e-15);
  EXPECT_LT((s.delta_bc(1, 0.0) - (Matrix(2, 2) << 0, 0, 0.2, 0.2).finished()).norm(), 1e-15);
  EXPECT_LT((s.delta_cc(2, 0.0) - (Matrix(1, 2) << 0.2, 0).finished()).norm(), 1e-15);
  EXPECT_EQ(s.delta_dc(0, 0.0), Matrix::Zero(1, 2));
  const double t = 0.3;
  EXPECT_NEAR(s.delta_ac(0, t)(0, 1), 0.5 * std::sin(5 * t), 1e-15);
  EXPECT_NEAR(s.delta_dc(0, t)(0, 1), 0.2 * std::sin(t), 1e-15);
}

TEST(Perturbations, GenericShapesRespectAmplitude)
{
  const PerturbationSignals s = builtin_perturbations(3, 1, 2, manipulator::bounds());
  for (double t : {0.0, 0.7, 2.9}) {
    EXPECT_EQ(s.delta_ac(0, t).rows(), 3);
    EXPECT_LE(s.delta_ac(0, t).cwiseAbs().maxCoeff(), 0.5);
    EXPECT_EQ(s.delta_cc(0, t).rows(), 2);
    EXPECT_EQ(s.delta_dc(0, t).cols(), 1);
  }
}

TEST(Perturbations, ClipEventsCounted)
{
  // the 2x2 sine block exceeds its spectral bound for part of each period
  SimConfig cfg = quiet(3.0, 1e-3);
  cfg.perturbations = builtin_perturbations(2, 2, 1, manipulator::bounds());
  const Trajectory tr = simulate(manipulator::system(), damped_dynamic(), cfg);
  EXPECT_GT(tr.clip_events[0], 0);
  // one count per agent and grid time at most
  EXPECT_LE(tr.clip_events[0], 3 * static_cast<long>(tr.size()));
}

TEST(Integrator, StringRoundTrip)
{
  EXPECT_EQ(integrator_from_string(to_string(Integrator::kEuler)), Integrator::kEuler);
  EXPECT_EQ(sim_status_from_string(to_string(SimStatus::kDiverged)), SimStatus::kDiverged);
  EXPECT_THROW(integrator_from_string("rk45"), std::invalid_argument);
}
