#include <cmath>

#include <gtest/gtest.h>

#include "consynth/analysis.hpp"
#include "consynth/manipulator.hpp"

using namespace consynth;

namespace {

std::vector<double> grid(double t_end, int steps)
{
  std::vector<double> t(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) { t[static_cast<std::size_t>(k)] = t_end * k / steps; }
  return t;
}

Matrix lyapunov_solution(const Matrix & a, const Matrix & q)
{
  const auto n = a.rows();
  const Matrix i = Matrix::Identity(n, n);
  const Matrix k = kron(i, a.transpose()) + kron(a.transpose(), i);
  const Vector rhs = -Eigen::Map<const Vector>(q.data(), n * n);
  const Vector v = k.fullPivLu().solve(rhs);
  const Matrix p = Eigen::Map<const Matrix>(v.data(), n, n);
  return 0.5 * (p + p.transpose());
}

Trajectory two_agent_trajectory(const std::vector<double> & times, double gap0, double rate)
{
  Trajectory tr;
  tr.n_agents = 2;
  tr.n = 1;
  tr.m = 1;
  tr.times = times;
  for (double t : times) {
    tr.x.push_back((Vector(2) << 0.0, gap0 * std::exp(-rate * t)).finished());
    tr.x_c.push_back(Vector(0));
    tr.u.push_back((Vector(2) << 1.0, -2.0).finished());
    tr.y.push_back(tr.x.back());
    tr.xi.push_back(Vector::Zero(2));
  }
  return tr;
}

}  // namespace

TEST(PerformanceIndices, ConstantSignal)
{
  const auto t = grid(4.0, 400);
  const std::vector<double> v(t.size(), -1.5);
  const PerformanceIndices p = performance_indices(t, v);
  EXPECT_NEAR(p.ise, 2.25 * 4.0, 1e-12);
  EXPECT_NEAR(p.iae, 1.5 * 4.0, 1e-12);
  EXPECT_NEAR(p.itse, 2.25 * 8.0, 1e-12);
  EXPECT_NEAR(p.itae, 1.5 * 8.0, 1e-12);
}

TEST(PerformanceIndices, RampSignal)
{
  const auto t = grid(2.0, 2000);
  const PerformanceIndices p = performance_indices(t, t);
  EXPECT_NEAR(p.iae, 2.0, 1e-12);
  EXPECT_NEAR(p.ise, 8.0 / 3.0, 1e-5);
  EXPECT_NEAR(p.itae, 8.0 / 3.0, 1e-5);
  EXPECT_NEAR(p.itse, 4.0, 1e-5);
}

TEST(PerformanceIndices, Window)
{
  const auto t = grid(10.0, 1000);
  const std::vector<double> v(t.size(), 1.0);
  const PerformanceIndices p = performance_indices(t, v, std::make_pair(2.0, 5.0));
  EXPECT_NEAR(p.iae, 3.0, 1e-9);
  EXPECT_NEAR(p.itae, (25.0 - 4.0) / 2.0, 1e-9);
}

TEST(PerformanceIndices, RejectsBadInput)
{
  EXPECT_THROW(performance_indices({}, {}), std::invalid_argument);
  EXPECT_THROW(performance_indices({0.0, 1.0}, {1.0}), DimensionError);
}

TEST(ControlEffort, PerAgentNorms)
{
  const Trajectory tr = two_agent_trajectory(grid(1.0, 10), 1.0, 1.0);
  const auto idx = control_effort(tr);
  ASSERT_EQ(idx.size(), 2u);
  EXPECT_NEAR(idx[0].iae, 1.0, 1e-12);
  EXPECT_NEAR(idx[1].ise, 4.0, 1e-12);
}

TEST(ConsensusError, MaxPairwiseNorm)
{
  Trajectory tr;
  tr.n_agents = 3;
  tr.n = 2;
  tr.times = {0.0};
  tr.x = {(Vector(6) << 0, 0, 3, 4, 1, 0).finished()};
  EXPECT_DOUBLE_EQ(consensus_error(tr)[0], 5.0);
}

TEST(Settling, ExponentialDecay)
{
  const auto t = grid(10.0, 10000);
  std::vector<double> e;
  for (double s : t) { e.push_back(std::exp(-s)); }
  const SettlingInfo s = settling(t, e, 0.05);
  ASSERT_TRUE(s.settled_at.has_value());
  EXPECT_NEAR(*s.settled_at, std::log(20.0), 1.1e-3);
  EXPECT_EQ(s.recrossings, 0);
}

TEST(Settling, RecrossingsAndNeverSettled)
{
  const std::vector<double> t{0, 1, 2, 3, 4, 5};
  const SettlingInfo a = settling(t, {1.0, 0.01, 0.2, 0.01, 0.2, 0.01}, 0.05);
  EXPECT_EQ(a.recrossings, 2);
  EXPECT_DOUBLE_EQ(*a.settled_at, 5.0);
  const SettlingInfo b = settling(t, {1.0, 0.5, 0.5, 0.5, 0.5, 0.5}, 0.05);
  EXPECT_FALSE(b.settled_at.has_value());
}

TEST(Settling, ZeroInitialError)
{
  const SettlingInfo s = settling({0.0, 1.0}, {0.0, 0.0}, 0.05);
  ASSERT_TRUE(s.settled_at.has_value());
  EXPECT_EQ(*s.settled_at, 0.0);
}

TEST(Hinf, UndefinedWithoutDisturbance)
{
  const SynthesisProblem p = manipulator::problem();
  Trajectory tr;
  tr.n_agents = 3;
  tr.n = 4;
  tr.n_c = 2;
  tr.times = {0.0, 0.1};
  tr.x = {Vector::Ones(12), Vector::Ones(12)};
  tr.x_c = {Vector::Zero(6), Vector::Zero(6)};
  tr.xi = {Vector::Zero(12), Vector::Zero(12)};
  const HinfReport h = hinf_energy_ratio(tr, p.reduced, q_tilde(p));
  EXPECT_FALSE(h.ratio.has_value());
  EXPECT_FALSE(h.zero_initial_state);
  EXPECT_EQ(h.output_energy, 0.0);
}

TEST(Hinf, EnergyQuadrature)
{
  const SynthesisProblem p = manipulator::problem();
  Trajectory tr;
  tr.n_agents = 3;
  tr.n = 4;
  tr.n_c = 2;
  tr.times = {0.0, 0.5, 1.0};
  Vector xi = Vector::Zero(12);
  xi(0) = 2.0;  // L_hat_n xi has a single nonzero entry of magnitude 2
  for (int k = 0; k < 3; ++k) {
    tr.x.push_back(Vector::Zero(12));
    tr.x_c.push_back(Vector::Constant(6, static_cast<double>(k)));
    tr.xi.push_back(xi);
  }
  const HinfReport h = hinf_energy_ratio(tr, p.reduced, q_tilde(p));
  // Q = 2 I on the controller block: q(k) = 12 k^2, trapezoid 0.25 (0 + 12) + 0.25 (12 + 48)
  EXPECT_NEAR(h.output_energy, 18.0, 1e-12);
  EXPECT_NEAR(h.disturbance_energy, 4.0, 1e-12);
  ASSERT_TRUE(h.ratio.has_value());
  EXPECT_TRUE(h.zero_initial_state);
}

TEST(Dissipation, HoldsForLyapunovCertificateOfLinearLoop)
{
  const SynthesisProblem p = manipulator::problem();
  const ControllerRealization c = lqr_output_seed(p);
  const Matrix a_phi = build_a_phi(p.reduced, c, p.mas);
  const Matrix q = q_tilde(p);
  const Matrix cert = lyapunov_solution(a_phi, 2.0 * q);
  ASSERT_GT(min_eig_sym(cert), 0.0);
  EXPECT_LT(algebraic_lyapunov_check(a_phi, cert, q), 0.0);
  SimConfig cfg;
  cfg.horizon = 2.0;
  cfg.nonlinearity = false;
  cfg.disturbance.kind = DisturbanceSpec::Kind::kNone;
  const Trajectory tr = simulate(p.mas, c, cfg);
  const DissipationReport good = dissipation_check(tr, p.reduced, cert, q, 1.0);
  EXPECT_EQ(good.samples, tr.size() - 2);
  EXPECT_EQ(good.violations, 0u);
  EXPECT_EQ(good.lyapunov.size(), tr.size());
  const DissipationReport bad = dissipation_check(tr, p.reduced, -cert, q, 1.0);
  EXPECT_GT(bad.violations, 0u);
  EXPECT_THROW(dissipation_check(tr, p.reduced, Matrix::Identity(3, 3), q, 1.0), DimensionError);
}

TEST(Metrics, ReportFields)
{
  const SynthesisProblem p = manipulator::problem();
  const ControllerRealization c = lqr_output_seed(p);
  SimConfig cfg;
  cfg.horizon = 1.0;
  const Trajectory tr = simulate(p.mas, c, cfg);
  const MetricsReport m = compute_metrics(tr, p.reduced, nullptr, q_tilde(p), 1.0);
  EXPECT_EQ(m.consensus_error.size(), tr.size());
  EXPECT_EQ(m.indices.size(), 3u);
  EXPECT_FALSE(m.dissipation.has_value());
  ASSERT_TRUE(m.hinf.has_value());
  EXPECT_TRUE(m.hinf->ratio.has_value());
  EXPECT_DOUBLE_EQ(m.settle_5.threshold, 0.05 * m.initial_error);
}

TEST(Reference, PublishedTable)
{
  const auto r = published_reference_indices();
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].indices.ise, 1.703);
  EXPECT_EQ(r[2].indices.itse, 8.92e-4);
}
