#pragma once

#include "consynth/synthesis.hpp"

namespace consynth::oracle {

// Grand pencil assembled with plain dense algebra from the structured point.
inline Matrix dense_grand(const SynthesisProblem & p, const StructuredPoint & pt, SynthesisMode mode)
{
  const int n_ag = p.mas.n_agents(), n = p.mas.n(), nc = p.n_c;
  const int nr = (n_ag - 1) * n, ncc = n_ag * nc, ncl = nr + ncc;
  const Matrix lhn = kron(p.reduced.l_hat, Matrix::Identity(n, n));
  const Matrix ps_big = kron(Matrix::Identity(n_ag - 1, n_ag - 1), pt.p_s);
  const Matrix pi_d = lhn * block_diag(pt.k);

  Matrix phi = Matrix::Zero(ncl, ncl);
  phi.topLeftCorner(nr, nr) = p.reduced.a_r.transpose() * ps_big + ps_big * p.reduced.a_r + pi_d * p.reduced.c_r +
                              (pi_d * p.reduced.c_r).transpose();
  Matrix pbig = Matrix::Zero(ncl, ncl);
  pbig.topLeftCorner(nr, nr) = ps_big;
  if (nc > 0) {
    const Matrix phi12 = p.reduced.c_r.transpose() * block_diag(pt.z).transpose() + lhn * block_diag(pt.f);
    phi.topRightCorner(nr, ncc) = phi12;
    phi.bottomLeftCorner(ncc, nr) = phi12.transpose();
    const Matrix w = block_diag(pt.w);
    phi.bottomRightCorner(ncc, ncc) = w + w.transpose();
    pbig.bottomRightCorner(ncc, ncc) = block_diag(pt.p_c);
  }
  Matrix gamma = Matrix::Zero(p.h_hat.rows(), p.h_hat.rows());
  {
    int off = 0;
    for (int i = 0; i < n_ag - 1; ++i) {
      const int vi = p.h_hat_blocks[static_cast<std::size_t>(i)];
      gamma.block(off, off, vi, vi) = pt.gamma_hat[static_cast<std::size_t>(i)] * Matrix::Identity(vi, vi);
      off += vi;
    }
  }
  Matrix top = phi + q_tilde(p);
  std::vector<Matrix> cols, diags;
  cols.push_back(pbig);
  diags.push_back(-pt.rho2 * Matrix::Identity(ncl, ncl));
  Matrix lb = Matrix::Zero(ncl, p.reduced.l_hat_n_b.cols());
  lb.topRows(nr) = p.reduced.l_hat_n_b;
  Matrix e0i = Matrix::Zero(ncl, ncc), ei0 = Matrix::Zero(ncl, nr), eh = Matrix::Zero(ncl, p.h_hat.rows());
  e0i.bottomRows(ncc).setIdentity();
  ei0.topRows(nr).setIdentity();
  eh.topRows(nr) = p.h_hat.transpose();
  double t_h = pt.tau[0];
  if (mode == SynthesisMode::kTheorem1) {
    const PerturbationBounds & bd = p.bounds;
    const double crn = spectral_norm(p.reduced.c_r);
    Matrix shape = p.reduced.c_r.transpose() * p.reduced.c_r;
    if (p.options.delta_norm == DeltaNorm::kSpectral) { shape = crn * Matrix::Identity(nr, nr); }
    if (p.options.delta_norm == DeltaNorm::kSpectralSquared) { shape = crn * crn * Matrix::Identity(nr, nr); }
    top.topLeftCorner(nr, nr) += (pt.tau[1] * bd.delta_dc * bd.delta_dc + pt.tau[3] * bd.delta_bc * bd.delta_bc) * shape;
    top.bottomRightCorner(ncc, ncc) += (pt.tau[0] * bd.delta_cc * bd.delta_cc + pt.tau[2] * bd.delta_ac * bd.delta_ac) *
                                       Matrix::Identity(ncc, ncc);
    t_h = pt.tau[4];
    const int m_all = static_cast<int>(lb.cols());
    if (nc > 0) {
      cols.push_back(pbig * lb);
      diags.push_back(-pt.tau[0] * Matrix::Identity(m_all, m_all));
    }
    cols.push_back(pbig * lb);
    diags.push_back(-pt.tau[1] * Matrix::Identity(m_all, m_all));
    if (nc > 0) {
      cols.push_back(pbig * e0i);
      diags.push_back(-pt.tau[2] * Matrix::Identity(ncc, ncc));
      cols.push_back(pbig * e0i);
      diags.push_back(-pt.tau[3] * Matrix::Identity(ncc, ncc));
    }
    cols.push_back(pbig * ei0);
    diags.push_back(-pt.tau[4] * Matrix::Identity(nr, nr));
  } else {
    cols.push_back(pbig * ei0);
    diags.push_back(-pt.tau[0] * Matrix::Identity(nr, nr));
  }
  cols.push_back(t_h * eh);
  diags.push_back(-gamma);

  Eigen::Index total = ncl;
  for (const auto & d : diags) { total += d.rows(); }
  Matrix g = Matrix::Zero(total, total);
  g.topLeftCorner(ncl, ncl) = top;
  Eigen::Index off = ncl;
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const auto w = diags[j].rows();
    g.block(0, off, ncl, w) = cols[j];
    g.block(off, 0, w, ncl) = cols[j].transpose();
    g.block(off, off, w, w) = diags[j];
    off += w;
  }
  return g;
}

}  // namespace consynth::oracle
