#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "consynth/lmi.hpp"
#include "consynth/reduction.hpp"
#include "consynth/sdp_solver.hpp"

namespace consynth {

enum class SynthesisMode { kTheorem1, kCorollary1 };

std::string to_string(SynthesisMode m);
SynthesisMode synthesis_mode_from_string(const std::string & s);

/// How ||dD_c C_r x_r||^2 and ||dB_c C_r x_r||^2 are bounded in the
/// uncertainty block.
enum class DeltaNorm {
  /// ||C_r|| delta^2 I
  kSpectral,
  /// ||C_r||^2 delta^2 I
  kSpectralSquared,
  /// delta^2 C_r^T C_r (exact bound)
  kOutputGram,
};

std::string to_string(DeltaNorm d);
DeltaNorm delta_norm_from_string(const std::string & s);

struct RefinementOptions
{
  int max_iterations = 30;
  /// stop when the objective improves by less than this relative amount
  double rel_tol = 1e-3;
  /// slack iterations without progress before giving up
  int max_stalled = 3;
};

struct SynthesisOptions
{
  double margin_eps = 1e-6;
  double box = 1e6;
  DeltaNorm delta_norm = DeltaNorm::kSpectral;
  /// > 0 adds the pole-region constraint: eigenvalues of each A_ci in the
  /// disk of center -r and radius r
  double controller_pole_radius = 0.0;
  double recovery_threshold = 1e-6;
  /// run the alternating refinement when the direct recovery is inconsistent
  bool consistent_recovery = false;
  RefinementOptions refinement;
  SolverOptions solver;
};

struct SynthesisProblem
{
  MultiAgentSystem mas;
  ReducedSystem reduced;
  DesignWeights weights;
  PerturbationBounds bounds;
  /// diag(H_1..H_{N-1}), sum v_i x (N-1)n
  Matrix h_hat;
  /// row count v_i of each H_i
  std::vector<int> h_hat_blocks;
  int n_c = 0;
  SynthesisOptions options;

  void validate() const;
};

/// Block ids of the structured decision variables.
struct SynthesisVariables
{
  VariableLayout layout;
  int p_s = -1;
  std::vector<int> p_c, w, z, f, k;
  /// tau_1..tau_5 (index 0..4); -1 when absent
  std::array<int, 5> tau{-1, -1, -1, -1, -1};
  int rho2 = -1;
  std::vector<int> gamma_hat;
};

struct BuiltLmi
{
  SynthesisMode mode = SynthesisMode::kTheorem1;
  LmiProblem problem;
  SynthesisVariables vars;
  int grand_index = 0;
};

BuiltLmi build_theorem1(const SynthesisProblem & problem);
BuiltLmi build_corollary1(const SynthesisProblem & problem);
BuiltLmi build_lmi(const SynthesisProblem & problem, SynthesisMode mode);

/// Structured variable values at x, keyed by layout name.
struct StructuredPoint
{
  Matrix p_s;
  std::vector<Matrix> p_c, w, z, f, k;
  std::array<double, 5> tau{0, 0, 0, 0, 0};
  double rho2 = 0.0;
  std::vector<double> gamma_hat;
};

StructuredPoint structured_point(const BuiltLmi & built, const Vector & x);

/// P = diag(I_{N-1} (x) p_s, P_c1 .. P_cN)
Matrix certificate_p(const StructuredPoint & pt, int n_agents);
/// Q_tilde = diag(R_1..R_{N-1}, Q_1..Q_N)
Matrix q_tilde(const SynthesisProblem & problem);
/// Uncertainty block of the grand pencil at given tau values.
Matrix delta_block(const SynthesisProblem & problem, const std::array<double, 5> & tau);

/// Controller recovery from a solved point. Residuals ||p_s B_i C_ci - f_i|| /
/// max(1, ||f_i||) (same for k_i) are stored in the result.
/// Throws NumericalError when p_s or some P_ci is not positive definite.
ControllerRealization recover_controllers(const SynthesisProblem & problem, const BuiltLmi & built, const Vector & x);

/// sqrt(tau_5 / gamma_hat_i) (tau_1 for the nominal variant)
std::vector<double> robustness_degrees(const BuiltLmi & built, const Vector & x);

struct RefinementReport
{
  bool attempted = false;
  bool succeeded = false;
  int iterations = 0;
  std::vector<double> slack_history;
  std::vector<double> objective_history;
  std::string message;
};

struct SynthesisResult
{
  SynthesisMode mode = SynthesisMode::kTheorem1;
  SolveStatus status = SolveStatus::kNumericalFailure;
  std::string message;
  ControllerRealization controllers;
  double rho = 0.0;
  double rho_squared = 0.0;
  std::vector<double> gamma_hat;
  /// tau_1..tau_5 for the robust variant, tau_1 only for the nominal one
  std::vector<double> tau;
  Matrix p_bar_s;
  std::vector<Matrix> p_c;
  /// max eigenvalue of the solved grand pencil
  double lmi_residual = 0.0;
  /// max over all constraints of lambda_max + margin
  double max_violation = 0.0;
  double objective = 0.0;
  bool recovery_consistent = false;
  RefinementReport refinement;
  Vector x;
  std::vector<std::string> warnings;
  int solver_iterations = 0;
  double solver_runtime = 0.0;
  std::optional<double> infeasibility_certificate;

  bool feasible() const { return status == SolveStatus::kOptimal || status == SolveStatus::kFeasible; }
};

/// Fill the result fields that follow from (built, x).
SynthesisResult make_result(const SynthesisProblem & problem, const BuiltLmi & built, const Vector & x);

/**
 * @brief Full pipeline: assemble, solve, recover, optionally refine.
 *
 * With options.consistent_recovery and a recovery residual above the
 * threshold, runs the alternating refinement seeded by `seed` (or the default
 * seed for the mode).
 */
SynthesisResult synthesize(const SynthesisProblem & problem, SynthesisMode mode,
                           const std::optional<ControllerRealization> & seed = std::nullopt);

/**
 * @brief Alternating convex refinement toward a consistent recovery.
 *
 * Alternates between fixing (C_c, D_c), which makes f_i = p_s B_i C_ci and
 * k_i = p_s B_i D_ci linear equalities, and fixing p_s with f_i, k_i
 * restricted to range(p_s B_i). Starts by minimizing a slack on the grand
 * pencil until it is strictly feasible, then minimizes the objective.
 * Returns the final decision vector when a strictly feasible consistent point
 * was found.
 */
std::optional<Vector> refine_recovery(const SynthesisProblem & problem, const BuiltLmi & built,
                                      const ControllerRealization & seed, RefinementReport & report);

/// Static output gain seed: per-agent LQR gain projected through pinv(C_bar),
/// scaled by the power of 1/2 minimizing the reduced static-loop abscissa.
ControllerRealization lqr_output_seed(const SynthesisProblem & problem);

/// Stabilizing solution of A^T X + X A - X B R^-1 B^T X + Q = 0.
Matrix solve_care(const Matrix & a, const Matrix & b, const Matrix & q, const Matrix & r);

struct CheckItem
{
  std::string name;
  bool evaluated = false;
  bool passed = false;
  double value = 0.0;
  std::string detail;
};

struct VerificationReport
{
  std::vector<CheckItem> checks;
  bool all_passed() const;
  const CheckItem * find(const std::string & name) const;
};

/**
 * @brief Post-solve checks of a synthesis result.
 *
 * grand_pencil: solved pencil max eigenvalue <= -margin + tol;
 * a_phi_hurwitz: spectral abscissa of the nominal reduced loop < 0;
 * lyapunov_nominal: A_Phi^T P + P A_Phi + Q_tilde < 0;
 * omega_reconstruction: the pre-linearization matrix at the solution < 0;
 * schur_cross_check: the Schur complement of the last block matches it.
 * The last two are skipped for the nominal variant.
 */
VerificationReport verify_synthesis(const SynthesisProblem & problem, const SynthesisResult & result,
                                    const ControllerRealization & ctrl);

}  // namespace consynth
