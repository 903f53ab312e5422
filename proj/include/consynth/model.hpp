#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "consynth/matgraph.hpp"

namespace consynth {

/// h_i(t, x_i) -> R^n
using Nonlinearity = std::function<Vector(double, const Vector &)>;

/// Serializable description of the built-in nonlinearities.
struct NonlinearitySpec
{
  enum class Kind { kNone, kSine };
  Kind kind = Kind::kNone;
  /// kSine: h[target] = -gain * sin(x[source]), other entries zero.
  int source = 0;
  int target = 0;
  double gain = 0.0;
};

Nonlinearity make_nonlinearity(const NonlinearitySpec & spec, int n);

struct AgentModel
{
  Matrix a_bar;
  Matrix b;
  Matrix c_bar;
  Matrix h_bar;
  double alpha_bar = 1.0;
  Nonlinearity nonlinearity;

  int n() const { return static_cast<int>(a_bar.rows()); }
  int m() const { return static_cast<int>(b.cols()); }
  int q() const { return static_cast<int>(c_bar.rows()); }

  /// Shape consistency, alpha_bar > 0, finiteness and h(0, 0) = 0.
  void validate() const;
};

struct MultiAgentSystem
{
  std::vector<AgentModel> agents;
  NetworkGraph graph;
  Matrix global_a;
  Matrix global_b;
  Matrix global_c;
  std::vector<std::string> warnings;

  int n_agents() const { return static_cast<int>(agents.size()); }
  int n() const { return agents.front().n(); }
  int m() const { return agents.front().m(); }
  int q() const { return agents.front().q(); }
};

/// A = I_N (x) A_bar, B = diag(B_i), C = I_N (x) C_bar. Rank tests for
/// controllability / observability only produce warnings.
MultiAgentSystem assemble_global(const std::vector<AgentModel> & agents, const NetworkGraph & graph);

bool is_controllable(const Matrix & a, const Matrix & b, double rel_tol = 1e-9);
bool is_observable(const Matrix & a, const Matrix & c, double rel_tol = 1e-9);

struct QuadraticBoundReport
{
  std::size_t samples = 0;
  std::size_t violations = 0;
  /// max over samples of h^T h / (alpha^2 x^T Hbar^T Hbar x); 0/0 counts as 0
  double max_ratio = 0.0;
};

struct StateSample
{
  double t = 0.0;
  Vector x;
};

QuadraticBoundReport check_quadratic_bound(const AgentModel & agent, const std::vector<StateSample> & samples);

/// Uniform samples in [-half_width, half_width]^n, t uniform in [0, t_max].
std::vector<StateSample> sample_states(int n, std::size_t count, double half_width, double t_max, std::uint64_t seed);

struct NonlinearityBound
{
  /// H_i, v_i x n each
  std::vector<Matrix> per_agent_h;
  /// gamma_li > 0, one per H_i
  std::vector<double> gamma;
  Matrix h_hat;
};

/**
 * @brief Aggregation condition on (H, Gamma).
 *
 * lambda_max(Hbar^T Hbar) * min_i gamma_bar_i <= max_i gamma_i * min_i lambda_min(H_i^T H_i)
 * with gamma_bar_i = alpha_bar_i^-2.
 */
bool check_aggregation_condition(const NonlinearityBound & bound, const Matrix & h_bar_stack,
                                 const std::vector<double> & alpha_bar);

struct PerturbationBounds
{
  double delta_ac = 0.0;
  double delta_bc = 0.0;
  double delta_cc = 0.0;
  double delta_dc = 0.0;
};

struct DesignWeights
{
  /// N-1 blocks, n x n
  std::vector<Matrix> r;
  /// N blocks, n_c x n_c
  std::vector<Matrix> q;

  static DesignWeights scaled_identity(double r_scale, double q_scale, int n_agents, int n, int n_c);
  void validate() const;
};

struct ControllerRealization
{
  int order = 0;
  std::vector<Matrix> a_c;
  std::vector<Matrix> b_c;
  std::vector<Matrix> c_c;
  std::vector<Matrix> d_c;
  /// relative residuals of the C_c and D_c recovery per agent
  std::vector<double> residual_c;
  std::vector<double> residual_d;
  std::vector<double> robustness_degrees;

  int n_agents() const { return static_cast<int>(d_c.size()); }
  Matrix global_a() const { return block_diag(a_c); }
  Matrix global_b() const { return block_diag(b_c); }
  Matrix global_c() const { return block_diag(c_c); }
  Matrix global_d() const { return block_diag(d_c); }
  double max_residual() const;
  void validate(int n_agents, int m, int q) const;
};

}  // namespace consynth
