#include "consynth/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace consynth {

Nonlinearity make_nonlinearity(const NonlinearitySpec & spec, int n)
{
  if (spec.kind == NonlinearitySpec::Kind::kNone) {
    return [n](double, const Vector &) { return Vector::Zero(n); };
  }
  if (spec.source < 0 || spec.source >= n || spec.target < 0 || spec.target >= n) {
    throw DimensionError("sine nonlinearity: index outside the state dimension");
  }
  const int src = spec.source, tgt = spec.target;
  const double gain = spec.gain;
  return [=](double, const Vector & x) {
    Vector h = Vector::Zero(n);
    h(tgt) = -gain * std::sin(x(src));
    return h;
  };
}

void AgentModel::validate() const
{
  const auto nn = a_bar.rows();
  if (nn == 0 || a_bar.cols() != nn) { throw DimensionError("agent: A_bar must be square and nonempty"); }
  if (b.rows() != nn) { throw DimensionError("agent: B rows must equal n"); }
  if (c_bar.cols() != nn) { throw DimensionError("agent: C_bar cols must equal n"); }
  if (h_bar.size() > 0 && h_bar.cols() != nn) { throw DimensionError("agent: H_bar cols must equal n"); }
  if (!a_bar.allFinite() || !b.allFinite() || !c_bar.allFinite() || !h_bar.allFinite()) {
    throw NumericalError("agent: non-finite matrix entry");
  }
  if (!(alpha_bar > 0.0) || !std::isfinite(alpha_bar)) { throw std::invalid_argument("agent: alpha_bar must be > 0"); }
  if (nonlinearity) {
    const Vector h0 = nonlinearity(0.0, Vector::Zero(nn));
    if (h0.size() != nn) { throw DimensionError("agent: nonlinearity must return an n-vector"); }
    if (h0.norm() > 1e-12) { throw std::invalid_argument("agent: nonlinearity must vanish at x = 0"); }
  }
}

bool is_controllable(const Matrix & a, const Matrix & b, double rel_tol)
{
  const auto n = a.rows();
  Matrix ctrb(n, n * b.cols());
  Matrix blk = b;
  for (Eigen::Index k = 0; k < n; ++k) {
    ctrb.middleCols(k * b.cols(), b.cols()) = blk;
    blk = a * blk;
  }
  return numerical_rank(ctrb, rel_tol) == n;
}

bool is_observable(const Matrix & a, const Matrix & c, double rel_tol)
{
  return is_controllable(a.transpose(), c.transpose(), rel_tol);
}

MultiAgentSystem assemble_global(const std::vector<AgentModel> & agents, const NetworkGraph & graph)
{
  if (agents.empty()) { throw DimensionError("assemble_global: no agents"); }
  if (graph.n_agents != static_cast<int>(agents.size())) {
    throw DimensionError("assemble_global: graph size differs from agent count");
  }
  MultiAgentSystem mas;
  mas.agents = agents;
  mas.graph = graph;
  const AgentModel & a0 = agents.front();
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const AgentModel & ai = agents[i];
    ai.validate();
    if (ai.n() != a0.n() || ai.m() != a0.m() || ai.q() != a0.q()) {
      throw DimensionError("assemble_global: agent " + std::to_string(i + 1) + " dimensions differ");
    }
    if (ai.a_bar != a0.a_bar || ai.c_bar != a0.c_bar) {
      throw std::invalid_argument("assemble_global: A_bar and C_bar must be shared by all agents");
    }
    if (!is_controllable(ai.a_bar, ai.b)) {
      mas.warnings.push_back("agent " + std::to_string(i + 1) + ": (A_bar, B_i) fails the controllability rank test");
    }
  }
  if (!is_observable(a0.a_bar, a0.c_bar)) { mas.warnings.push_back("(A_bar, C_bar) fails the observability rank test"); }

  const auto n_ag = static_cast<Eigen::Index>(agents.size());
  mas.global_a = kron(Matrix::Identity(n_ag, n_ag), a0.a_bar);
  mas.global_c = kron(Matrix::Identity(n_ag, n_ag), a0.c_bar);
  std::vector<Matrix> bs;
  for (const auto & ai : agents) { bs.push_back(ai.b); }
  mas.global_b = block_diag(bs);
  return mas;
}

QuadraticBoundReport check_quadratic_bound(const AgentModel & agent, const std::vector<StateSample> & samples)
{
  QuadraticBoundReport rep;
  const double a2 = agent.alpha_bar * agent.alpha_bar;
  for (const auto & s : samples) {
    const Vector h = agent.nonlinearity ? agent.nonlinearity(s.t, s.x) : Vector::Zero(s.x.size());
    const double lhs = h.squaredNorm();
    const double rhs = agent.h_bar.size() > 0 ? a2 * (agent.h_bar * s.x).squaredNorm() : 0.0;
    ++rep.samples;
    double ratio = 0.0;
    if (rhs > 0.0) {
      ratio = lhs / rhs;
    } else if (lhs > 0.0) {
      ratio = std::numeric_limits<double>::infinity();
    }
    rep.max_ratio = std::max(rep.max_ratio, ratio);
    if (lhs > rhs * (1.0 + 1e-12) + 1e-300) { ++rep.violations; }
  }
  return rep;
}

std::vector<StateSample> sample_states(int n, std::size_t count, double half_width, double t_max, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(-half_width, half_width);
  std::uniform_real_distribution<double> ut(0.0, t_max);
  std::vector<StateSample> out(count);
  for (auto & s : out) {
    s.t = t_max > 0.0 ? ut(rng) : 0.0;
    s.x.resize(n);
    for (int k = 0; k < n; ++k) { s.x(k) = ux(rng); }
  }
  return out;
}

bool check_aggregation_condition(const NonlinearityBound & bound, const Matrix & h_bar_stack,
                                 const std::vector<double> & alpha_bar)
{
  if (bound.per_agent_h.empty() || bound.per_agent_h.size() != bound.gamma.size() || alpha_bar.empty()) {
    throw DimensionError("aggregation condition: need matching H_i and gamma lists and alpha_bar values");
  }
  const double lhs_eig = max_eig_sym(h_bar_stack.transpose() * h_bar_stack);
  double min_gamma_bar = std::numeric_limits<double>::infinity();
  for (double a : alpha_bar) { min_gamma_bar = std::min(min_gamma_bar, 1.0 / (a * a)); }
  const double max_gamma = *std::max_element(bound.gamma.begin(), bound.gamma.end());
  double min_lam = std::numeric_limits<double>::infinity();
  for (const auto & h : bound.per_agent_h) { min_lam = std::min(min_lam, min_eig_sym(h.transpose() * h)); }
  const double lhs = lhs_eig * min_gamma_bar;
  const double rhs = max_gamma * min_lam;
  return lhs <= rhs + 1e-12 * std::max(std::abs(lhs), std::abs(rhs));
}

DesignWeights DesignWeights::scaled_identity(double r_scale, double q_scale, int n_agents, int n, int n_c)
{
  DesignWeights w;
  for (int i = 0; i + 1 < n_agents; ++i) { w.r.push_back(r_scale * Matrix::Identity(n, n)); }
  for (int i = 0; i < n_agents; ++i) { w.q.push_back(q_scale * Matrix::Identity(n_c, n_c)); }
  return w;
}

void DesignWeights::validate() const
{
  for (const auto & blocks : {&r, &q}) {
    for (const auto & m : *blocks) {
      if (m.size() == 0) { continue; }
      if (m.rows() != m.cols()) { throw DimensionError("weights: block not square"); }
      if (min_eig_sym(m) <= 0.0) { throw std::invalid_argument("weights: block not positive definite"); }
    }
  }
}

double ControllerRealization::max_residual() const
{
  double r = 0.0;
  for (double v : residual_c) { r = std::max(r, v); }
  for (double v : residual_d) { r = std::max(r, v); }
  return r;
}

void ControllerRealization::validate(int n_agents, int m, int q) const
{
  auto sz = [](const std::vector<Matrix> & v) { return static_cast<int>(v.size()); };
  if (sz(a_c) != n_agents || sz(b_c) != n_agents || sz(c_c) != n_agents || sz(d_c) != n_agents) {
    throw DimensionError("controller: need one (A_c, B_c, C_c, D_c) set per agent");
  }
  for (int i = 0; i < n_agents; ++i) {
    if (a_c[i].rows() != order || a_c[i].cols() != order || b_c[i].rows() != order || b_c[i].cols() != q ||
        c_c[i].rows() != m || c_c[i].cols() != order || d_c[i].rows() != m || d_c[i].cols() != q) {
      throw DimensionError("controller: agent " + std::to_string(i + 1) + " block shapes inconsistent");
    }
  }
}

}  // namespace consynth
