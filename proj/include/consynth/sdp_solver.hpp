#pragma once

#include <optional>
#include <string>

#include "consynth/lmi.hpp"

namespace consynth {

enum class SolveStatus { kOptimal, kFeasible, kInfeasible, kNumericalFailure };

std::string to_string(SolveStatus s);

struct SolverOptions
{
  int max_iterations = 150;
  /// relative gap and residual tolerance of the interior-point iteration
  double tol = 1e-8;
  /// absolute eigenvalue slack allowed by the post-check
  double post_check_tol = 1e-7;
  bool verbose = false;
  /// on failure, solve the auxiliary min-t problem to tell infeasible from
  /// numerical trouble
  bool classify_infeasibility = true;

  /// Defaults with `verbose` taken from CONSYNTH_SOLVER_VERBOSE.
  static SolverOptions from_env();
};

struct SolveStats
{
  int iterations = 0;
  double runtime_seconds = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double relative_gap = 0.0;
};

struct SolverSolution
{
  Vector x;
  SolveStatus status = SolveStatus::kNumericalFailure;
  double objective_value = 0.0;
  SolveStats stats;
  std::string message;
  /// min over t of max_i lambda_max(pencil_i) - t <= 0 when classified infeasible
  std::optional<double> infeasibility_certificate;
  /// max_i (lambda_max(pencil_i) + margin_i) at x
  double max_violation = 0.0;

  bool ok() const { return status == SolveStatus::kOptimal || status == SolveStatus::kFeasible; }
};

/**
 * @brief Minimize c^T x subject to the problem's pencils, box and equalities.
 *
 * Infeasible-start primal-dual path following (HKM direction, Mehrotra
 * predictor-corrector) on the dual-form SDP max b^T y s.t. C - A^T y >= 0,
 * with equalities eliminated through a null-space basis. A returned
 * optimal/feasible point always passes the eigenvalue post-check.
 */
SolverSolution solve(const LmiProblem & problem, const SolverOptions & options = {});

}  // namespace consynth
