#include "consynth/reduction.hpp"

#include <algorithm>
#include <random>

namespace consynth {

ReducedSystem build_reduced(const MultiAgentSystem & mas)
{
  const NetworkGraph & g = mas.graph;
  if (!g.connected || (g.n_agents > 1 && g.reduced_laplacian.rows() != g.n_agents - 1)) {
    throw GraphError("graph not connected");
  }
  const auto n_ag = static_cast<Eigen::Index>(mas.n_agents());
  const auto n = static_cast<Eigen::Index>(mas.n());
  const auto q = static_cast<Eigen::Index>(mas.q());

  ReducedSystem r;
  r.l_hat = g.reduced_laplacian;
  r.l_n = kron(g.laplacian, Matrix::Identity(n, n));
  r.l_q = kron(g.laplacian, Matrix::Identity(q, q));
  r.l_hat_n = kron(r.l_hat, Matrix::Identity(n, n));
  r.a_r = kron(Matrix::Identity(n_ag - 1, n_ag - 1), mas.agents.front().a_bar);
  r.c_r = mas.global_c * r.l_n * kron(pinv(r.l_hat), Matrix::Identity(n, n));
  r.l_hat_n_b = r.l_hat_n * mas.global_b;
  r.c_r_norm = spectral_norm(r.c_r);

  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> nd;
  for (int probe = 0; probe < 16; ++probe) {
    Vector x(n_ag * n);
    for (Eigen::Index k = 0; k < x.size(); ++k) { x(k) = nd(rng); }
    const Vector lhs = r.c_r * (r.l_hat_n * x);
    const Vector rhs = mas.global_c * (r.l_n * x);
    if ((lhs - rhs).norm() > 1e-8 * std::max(1.0, rhs.norm())) {
      throw NumericalError("build_reduced: C_r L_hat_n x != C L_n x; reduced output map is inconsistent");
    }
  }
  return r;
}

double verify_lemma1(const MultiAgentSystem & mas)
{
  const auto q = static_cast<Eigen::Index>(mas.q());
  const auto n = static_cast<Eigen::Index>(mas.n());
  const Matrix l_q = kron(mas.graph.laplacian, Matrix::Identity(q, q));
  const Matrix l_n = kron(mas.graph.laplacian, Matrix::Identity(n, n));
  return (l_q * mas.global_c - mas.global_c * l_n).norm();
}

double verify_lemma2(const MultiAgentSystem & mas)
{
  const auto n = static_cast<Eigen::Index>(mas.n());
  const Matrix l_n = kron(mas.graph.laplacian, Matrix::Identity(n, n));
  return (l_n * mas.global_a - mas.global_a * l_n).norm();
}

namespace {

void check_controller(const ControllerRealization & ctrl, const MultiAgentSystem & mas)
{
  ctrl.validate(mas.n_agents(), mas.m(), mas.q());
}

}  // namespace

Matrix build_a_phi(const ReducedSystem & reduced, const ControllerRealization & ctrl, const MultiAgentSystem & mas)
{
  check_controller(ctrl, mas);
  const auto nr = reduced.a_r.rows();
  const auto nc = static_cast<Eigen::Index>(ctrl.order) * mas.n_agents();
  Matrix out(nr + nc, nr + nc);
  out.topLeftCorner(nr, nr) = reduced.a_r + reduced.l_hat_n_b * ctrl.global_d() * reduced.c_r;
  if (nc > 0) {
    out.topRightCorner(nr, nc) = reduced.l_hat_n_b * ctrl.global_c();
    out.bottomLeftCorner(nc, nr) = ctrl.global_b() * reduced.c_r;
    out.bottomRightCorner(nc, nc) = ctrl.global_a();
  }
  return out;
}

Matrix build_full_closed_loop(const ReducedSystem & reduced, const ControllerRealization & ctrl,
                              const MultiAgentSystem & mas)
{
  check_controller(ctrl, mas);
  const auto nx = mas.global_a.rows();
  const auto nc = static_cast<Eigen::Index>(ctrl.order) * mas.n_agents();
  const Matrix lqc = reduced.l_q * mas.global_c;
  Matrix out(nx + nc, nx + nc);
  out.topLeftCorner(nx, nx) = mas.global_a + mas.global_b * ctrl.global_d() * lqc;
  if (nc > 0) {
    out.topRightCorner(nx, nc) = mas.global_b * ctrl.global_c();
    out.bottomLeftCorner(nc, nx) = ctrl.global_b() * lqc;
    out.bottomRightCorner(nc, nc) = ctrl.global_a();
  }
  return out;
}

}  // namespace consynth
