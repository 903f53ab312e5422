#pragma once

#include <optional>
#include <string>
#include <vector>

#include "consynth/reduction.hpp"
#include "consynth/sim.hpp"

namespace consynth {

/// e(t_k) = max over pairs of ||x_i(t_k) - x_j(t_k)||
std::vector<double> consensus_error(const Trajectory & traj);

struct SettlingInfo
{
  double threshold = 0.0;
  /// first time after which e stays below threshold
  std::optional<double> settled_at;
  /// upward crossings of the threshold after e first drops below it
  int recrossings = 0;
};

/// Threshold = fraction * e(0).
SettlingInfo settling(const std::vector<double> & times, const std::vector<double> & error, double fraction);

struct PerformanceIndices
{
  double ise = 0.0;
  double iae = 0.0;
  double itse = 0.0;
  double itae = 0.0;
};

/// Trapezoid integrals of v^2, |v|, t v^2, t |v| over [t_begin, t_end]
/// (the whole series when the window is empty). v must be nonnegative or a
/// signed scalar signal; magnitudes are taken.
PerformanceIndices performance_indices(const std::vector<double> & times, const std::vector<double> & values,
                                       std::optional<std::pair<double, double>> window = std::nullopt);

/// Per agent, with v = ||u_i(t)||.
std::vector<PerformanceIndices> control_effort(const Trajectory & traj,
                                               std::optional<std::pair<double, double>> window = std::nullopt);

/// Reduced closed-loop state (L_hat_n x, x_c) at sample k.
Vector reduced_state(const Trajectory & traj, const ReducedSystem & reduced, std::size_t k);

struct DissipationReport
{
  std::size_t samples = 0;
  std::size_t violations = 0;
  /// largest V' + x^T Q x - rho^2 xi_r^T xi_r
  double max_value = 0.0;
  /// largest value relative to the magnitude of its terms
  double max_relative = 0.0;
  std::vector<double> lyapunov;
};

/**
 * @brief Sample-wise check of V' + x_cl^T Q_tilde x_cl <= rho^2 xi_r^T xi_r.
 *
 * V = x_cl^T P x_cl with V' from central differences. A sample violates the
 * inequality when the left side exceeds rel_tol times the sum of the term
 * magnitudes.
 */
DissipationReport dissipation_check(const Trajectory & traj, const ReducedSystem & reduced, const Matrix & p_cert,
                                    const Matrix & q_tilde, double rho_squared, double rel_tol = 1e-2);

struct HinfReport
{
  double output_energy = 0.0;
  double disturbance_energy = 0.0;
  /// unset when the disturbance energy is zero
  std::optional<double> ratio;
  bool zero_initial_state = false;
};

/// int x_cl^T Q x_cl (trapezoid) over int xi_r^T xi_r (left rectangle, xi is
/// held over each step).
HinfReport hinf_energy_ratio(const Trajectory & traj, const ReducedSystem & reduced, const Matrix & q_tilde);

/// lambda_max(A^T P + P A + Q)
double algebraic_lyapunov_check(const Matrix & a, const Matrix & p, const Matrix & q);

struct ReferenceIndices
{
  int agent = 0;
  PerformanceIndices indices;
};

/// Published control-effort indices of the robust design on the manipulator
/// example. For side-by-side display only.
std::vector<ReferenceIndices> published_reference_indices();

struct MetricsReport
{
  std::vector<double> times;
  std::vector<double> consensus_error;
  double initial_error = 0.0;
  double final_error = 0.0;
  /// e(T) / e(0), 0 when e(0) = 0
  double final_ratio = 0.0;
  SettlingInfo settle_5;
  SettlingInfo settle_1;
  std::vector<PerformanceIndices> indices;
  std::optional<DissipationReport> dissipation;
  std::optional<HinfReport> hinf;
  std::vector<double> lyapunov;
};

MetricsReport compute_metrics(const Trajectory & traj, const ReducedSystem & reduced, const Matrix * p_cert,
                              const Matrix & q_tilde, double rho_squared, double settle_fraction = 0.05);

}  // namespace consynth
