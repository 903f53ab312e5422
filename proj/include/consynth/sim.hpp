#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "consynth/model.hpp"

namespace consynth {

enum class Integrator { kRk4, kEuler };

std::string to_string(Integrator i);
Integrator integrator_from_string(const std::string & s);

/// Zero-mean Gaussian noise held constant over each integration step.
struct DisturbanceSpec
{
  enum class Kind { kNone, kGaussian };
  Kind kind = Kind::kGaussian;
  double variance = 1.0;
  /// per-state mask (length n); empty means every channel
  std::vector<int> channels;

  void validate(int n) const;
};

/// Block generator for one agent: (agent index, t) -> matrix
using MatrixSignal = std::function<Matrix(int, double)>;

/// Time-varying controller perturbations, clipped to `bounds` at runtime.
struct PerturbationSignals
{
  MatrixSignal delta_ac, delta_bc, delta_cc, delta_dc;
  PerturbationBounds bounds;
};

/**
 * @brief Sinusoidal controller perturbations.
 *
 * For n_c = 2, q = 2, m = 1:
 * dA_c = 0.5 [sin 3t, sin 5t; sin 2t, cos 2t], dB_c = 0.2 [sin 2t; cos 2t]
 * replicated over both output columns, dC_c = 0.2 [cos t, sin 4t],
 * dD_c = 0.2 sin t in every entry. Other shapes get entry (r, c) =
 * delta sin((1 + r + 2c) t + c). Amplitudes come from `bounds`.
 */
PerturbationSignals builtin_perturbations(int n_c, int q, int m, const PerturbationBounds & bounds);

/// Rows: steps, columns: n_agents * n. Reproducible per seed.
Matrix sample_disturbance(const DisturbanceSpec & spec, int n_agents, int n, std::size_t steps, std::uint64_t seed);

struct SimConfig
{
  double horizon = 20.0;
  double dt = 1e-3;
  Integrator integrator = Integrator::kRk4;
  /// per agent; empty means seeded uniform in [-init_half_width, init_half_width]
  std::vector<Vector> initial_states;
  /// per agent; empty means zero
  std::vector<Vector> initial_controller_states;
  double init_half_width = 1.0;
  /// one sampled state copied to every agent
  bool identical_init = false;
  DisturbanceSpec disturbance;
  std::optional<PerturbationSignals> perturbations;
  bool nonlinearity = true;
  std::uint64_t seed = 1;
  /// keep every k-th step (the last step is always kept)
  int record_every = 1;
  double divergence_threshold = 1e9;

  void validate() const;
  std::size_t steps() const;
};

enum class SimStatus { kCompleted, kDiverged, kNonFinite };

std::string to_string(SimStatus s);
SimStatus sim_status_from_string(const std::string & s);

struct Trajectory
{
  int n_agents = 0, n = 0, n_c = 0, m = 0, q = 0;
  std::vector<double> times;
  /// stacked per agent: x (N n), x_c (N n_c), u (N m), y (N q), xi (N n)
  std::vector<Vector> x, x_c, u, y, xi;
  SimStatus status = SimStatus::kCompleted;
  std::string message;
  std::uint64_t seed = 0;
  double dt = 0.0;
  double horizon = 0.0;
  Integrator integrator = Integrator::kRk4;
  bool disturbance = false;
  bool perturbations = false;
  int record_every = 1;
  /// number of grid-time evaluations where dA_c, dB_c, dC_c, dD_c were clipped
  std::array<long, 4> clip_events{0, 0, 0, 0};

  std::size_t size() const { return times.size(); }
  Vector agent_state(std::size_t k, int agent) const { return x[k].segment(agent * n, n); }
};

/**
 * @brief Integrates the unreduced closed loop.
 *
 * x' = A x + B u + h(t, x) + xi, x_c' = (A_c + dA_c) x_c + (B_c + dB_c) L_q y,
 * u = (C_c + dC_c) x_c + (D_c + dD_c) L_q y, y = C x. Sample k holds the
 * state at t_k and the disturbance applied over [t_k, t_k + dt).
 */
Trajectory simulate(const MultiAgentSystem & mas, const ControllerRealization & ctrl, const SimConfig & cfg);

}  // namespace consynth
