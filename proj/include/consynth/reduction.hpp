#pragma once

#include "consynth/model.hpp"

namespace consynth {

struct ReducedSystem
{
  /// reduced Laplacian L_hat, (N-1) x N
  Matrix l_hat;
  /// I_{N-1} (x) A_bar
  Matrix a_r;
  /// C L_n (pinv(L_hat) (x) I_n), Nq x (N-1)n
  Matrix c_r;
  /// L_hat (x) I_n
  Matrix l_hat_n;
  /// L (x) I_n
  Matrix l_n;
  /// L (x) I_q
  Matrix l_q;
  /// L_hat_n B, (N-1)n x Nm
  Matrix l_hat_n_b;
  double c_r_norm = 0.0;
};

/// Throws GraphError for a disconnected graph and NumericalError when the
/// identity C_r L_hat_n x = C L_n x fails on the internal random probes.
ReducedSystem build_reduced(const MultiAgentSystem & mas);

/// ||L_q C - C L_n||_F
double verify_lemma1(const MultiAgentSystem & mas);
/// ||L_n A - A L_n||_F
double verify_lemma2(const MultiAgentSystem & mas);

/// Nominal closed loop in (x_r, x_c) coordinates:
/// [[A_r + L_hat_n B D_C C_r, L_hat_n B C_C], [B_C C_r, A_C]].
Matrix build_a_phi(const ReducedSystem & reduced, const ControllerRealization & ctrl, const MultiAgentSystem & mas);

/// Nominal closed loop in unreduced (x, x_c) coordinates, without h and xi:
/// [[A + B D_C L_q C, B C_C], [B_C L_q C, A_C]].
Matrix build_full_closed_loop(const ReducedSystem & reduced, const ControllerRealization & ctrl,
                              const MultiAgentSystem & mas);

}  // namespace consynth
