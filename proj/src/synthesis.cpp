#include "consynth/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace consynth {

std::string to_string(SynthesisMode m) { return m == SynthesisMode::kTheorem1 ? "theorem1" : "corollary1"; }

SynthesisMode synthesis_mode_from_string(const std::string & s)
{
  if (s == "theorem1") { return SynthesisMode::kTheorem1; }
  if (s == "corollary1") { return SynthesisMode::kCorollary1; }
  throw std::invalid_argument("unknown synthesis mode '" + s + "'");
}

std::string to_string(DeltaNorm d)
{
  switch (d) {
    case DeltaNorm::kSpectral: return "spectral";
    case DeltaNorm::kSpectralSquared: return "spectral_squared";
    case DeltaNorm::kOutputGram: return "output_gram";
  }
  return "spectral";
}

DeltaNorm delta_norm_from_string(const std::string & s)
{
  if (s == "spectral") { return DeltaNorm::kSpectral; }
  if (s == "spectral_squared") { return DeltaNorm::kSpectralSquared; }
  if (s == "output_gram") { return DeltaNorm::kOutputGram; }
  throw std::invalid_argument("unknown delta_norm '" + s + "' (spectral, spectral_squared, output_gram)");
}

void SynthesisProblem::validate() const
{
  const int n_ag = mas.n_agents();
  const int n = mas.n();
  if (n_ag < 2) { throw DimensionError("synthesis: need at least two agents"); }
  if (n_c < 0) { throw DimensionError("synthesis: negative controller order"); }
  if (static_cast<int>(weights.r.size()) != n_ag - 1 || static_cast<int>(weights.q.size()) != n_ag) {
    throw DimensionError("synthesis: need N-1 blocks R_i and N blocks Q_i");
  }
  for (const auto & r : weights.r) {
    if (r.rows() != n || r.cols() != n) { throw DimensionError("synthesis: R_i must be n x n"); }
  }
  for (const auto & q : weights.q) {
    if (q.rows() != n_c || q.cols() != n_c) { throw DimensionError("synthesis: Q_i must be n_c x n_c"); }
  }
  weights.validate();
  if (h_hat.cols() != (n_ag - 1) * n) { throw DimensionError("synthesis: H_hat must have (N-1)n columns"); }
  if (static_cast<int>(h_hat_blocks.size()) != n_ag - 1) { throw DimensionError("synthesis: need N-1 H_hat blocks"); }
  int v = 0;
  for (int i = 0; i < n_ag - 1; ++i) {
    const int vi = h_hat_blocks[static_cast<std::size_t>(i)];
    if (vi <= 0) { throw DimensionError("synthesis: H_hat blocks need at least one row"); }
    // off-diagonal blocks must vanish
    for (int j = 0; j < n_ag - 1; ++j) {
      if (j != i && h_hat.block(v, j * n, vi, n).cwiseAbs().maxCoeff() > 0.0) {
        throw DimensionError("synthesis: H_hat is not block diagonal");
      }
    }
    v += vi;
  }
  if (v != h_hat.rows()) { throw DimensionError("synthesis: H_hat block rows do not sum to its row count"); }
  const auto & b = bounds;
  if (b.delta_ac < 0 || b.delta_bc < 0 || b.delta_cc < 0 || b.delta_dc < 0) {
    throw std::invalid_argument("synthesis: perturbation bounds must be nonnegative");
  }
  if (reduced.a_r.rows() != (n_ag - 1) * n) { throw DimensionError("synthesis: reduced system does not match"); }
}

namespace {

struct Dims
{
  int n_ag, n, m, q, nc, nr, ncc, ncl, v;
};

Dims dims_of(const SynthesisProblem & p)
{
  Dims d{};
  d.n_ag = p.mas.n_agents();
  d.n = p.mas.n();
  d.m = p.mas.m();
  d.q = p.mas.q();
  d.nc = p.n_c;
  d.nr = (d.n_ag - 1) * d.n;
  d.ncc = d.n_ag * d.nc;
  d.ncl = d.nr + d.ncc;
  d.v = static_cast<int>(p.h_hat.rows());
  return d;
}

Matrix output_delta_shape(const SynthesisProblem & p)
{
  const auto nr = p.reduced.c_r.cols();
  switch (p.options.delta_norm) {
    case DeltaNorm::kSpectral: return p.reduced.c_r_norm * Matrix::Identity(nr, nr);
    case DeltaNorm::kSpectralSquared: return p.reduced.c_r_norm * p.reduced.c_r_norm * Matrix::Identity(nr, nr);
    case DeltaNorm::kOutputGram: return p.reduced.c_r.transpose() * p.reduced.c_r;
  }
  return Matrix();
}

/// Gamma_hat basis: diag(0..I_{v_i}..0)
Matrix gamma_selector(const SynthesisProblem & p, int i)
{
  const auto v = p.h_hat.rows();
  Matrix s = Matrix::Zero(v, v);
  int off = 0;
  for (int j = 0; j < i; ++j) { off += p.h_hat_blocks[static_cast<std::size_t>(j)]; }
  const int vi = p.h_hat_blocks[static_cast<std::size_t>(i)];
  s.block(off, off, vi, vi).setIdentity();
  return s;
}

/// Constant column selectors [L_hat_n B; 0], [0; I], [I; 0], [H_hat^T; 0]
struct Selectors
{
  Matrix lb, e0i, ei0, eh;
};

Selectors selectors(const SynthesisProblem & p, const Dims & d)
{
  Selectors s;
  s.lb = Matrix::Zero(d.ncl, d.n_ag * d.m);
  s.lb.topRows(d.nr) = p.reduced.l_hat_n_b;
  s.e0i = Matrix::Zero(d.ncl, d.ncc);
  s.e0i.bottomRows(d.ncc).setIdentity();
  s.ei0 = Matrix::Zero(d.ncl, d.nr);
  s.ei0.topRows(d.nr).setIdentity();
  s.eh = Matrix::Zero(d.ncl, d.v);
  s.eh.topRows(d.nr) = p.h_hat.transpose();
  return s;
}

AffineMatrix assemble_symmetric(const AffineMatrix & top, const std::vector<AffineMatrix> & cols,
                                const std::vector<AffineMatrix> & diags)
{
  const std::size_t k = cols.size();
  std::vector<std::vector<AffineMatrix>> grid(k + 1);
  grid[0].push_back(top);
  for (std::size_t j = 0; j < k; ++j) { grid[0].push_back(cols[j]); }
  for (std::size_t i = 0; i < k; ++i) {
    grid[i + 1].push_back(cols[i].transpose());
    for (std::size_t j = 0; j < k; ++j) {
      grid[i + 1].push_back(i == j ? diags[i] : AffineMatrix(diags[i].rows(), diags[j].cols()));
    }
  }
  return AffineMatrix::from_blocks(grid);
}

Matrix assemble_symmetric(const Matrix & top, const std::vector<Matrix> & cols, const std::vector<Matrix> & diags)
{
  Eigen::Index total = top.rows();
  for (const auto & dgl : diags) { total += dgl.rows(); }
  Matrix g = Matrix::Zero(total, total);
  g.topLeftCorner(top.rows(), top.cols()) = top;
  Eigen::Index off = top.rows();
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const auto w = diags[j].rows();
    g.block(0, off, top.rows(), w) = cols[j];
    g.block(off, 0, w, top.rows()) = cols[j].transpose();
    g.block(off, off, w, w) = diags[j];
    off += w;
  }
  return g;
}

SynthesisVariables make_layout(const Dims & d, SynthesisMode mode)
{
  SynthesisVariables v;
  v.p_s = v.layout.add_symmetric("p_s", d.n);
  if (d.nc > 0) {
    for (int i = 1; i <= d.n_ag; ++i) { v.p_c.push_back(v.layout.add_symmetric("p_c" + std::to_string(i), d.nc)); }
    for (int i = 1; i <= d.n_ag; ++i) { v.w.push_back(v.layout.add_full("w" + std::to_string(i), d.nc, d.nc)); }
    for (int i = 1; i <= d.n_ag; ++i) { v.z.push_back(v.layout.add_full("z" + std::to_string(i), d.nc, d.q)); }
    for (int i = 1; i <= d.n_ag; ++i) { v.f.push_back(v.layout.add_full("f" + std::to_string(i), d.n, d.nc)); }
  }
  for (int i = 1; i <= d.n_ag; ++i) { v.k.push_back(v.layout.add_full("k" + std::to_string(i), d.n, d.q)); }
  if (mode == SynthesisMode::kTheorem1) {
    for (int j = 0; j < 5; ++j) {
      const bool controller_channel = (j == 0 || j == 2 || j == 3);
      if (controller_channel && d.nc == 0) { continue; }
      v.tau[static_cast<std::size_t>(j)] = v.layout.add_scalar("tau" + std::to_string(j + 1));
    }
  } else {
    v.tau[0] = v.layout.add_scalar("tau1");
  }
  v.rho2 = v.layout.add_scalar("rho2");
  for (int i = 1; i < d.n_ag; ++i) { v.gamma_hat.push_back(v.layout.add_scalar("gamma_hat" + std::to_string(i))); }
  return v;
}

struct Pieces
{
  AffineMatrix p;
  AffineMatrix phi;
};

Pieces common_pieces(const SynthesisProblem & prob, const Dims & d, const SynthesisVariables & v)
{
  const VariableLayout & lay = v.layout;
  const Matrix & lh = prob.reduced.l_hat;
  const AffineMatrix ps = AffineMatrix::variable(lay, v.p_s);
  const AffineMatrix p_s_big = AffineMatrix::block_diag(std::vector<AffineMatrix>(static_cast<std::size_t>(d.n_ag - 1), ps));

  std::vector<AffineMatrix> pc, w, z;
  for (int i = 0; i < static_cast<int>(v.p_c.size()); ++i) {
    pc.push_back(AffineMatrix::variable(lay, v.p_c[static_cast<std::size_t>(i)]));
    w.push_back(AffineMatrix::variable(lay, v.w[static_cast<std::size_t>(i)]));
    z.push_back(AffineMatrix::variable(lay, v.z[static_cast<std::size_t>(i)]));
  }
  const AffineMatrix p_c_big = d.ncc > 0 ? AffineMatrix::block_diag(pc) : AffineMatrix(0, 0);
  const AffineMatrix w_big = d.ncc > 0 ? AffineMatrix::block_diag(w) : AffineMatrix(0, 0);
  const AffineMatrix z_big = d.ncc > 0 ? AffineMatrix::block_diag(z) : AffineMatrix(0, d.n_ag * d.q);

  // Pi_D, Pi_C: block (i, j) = L_hat(i, j) * k_j (resp. f_j)
  std::vector<std::vector<AffineMatrix>> pid(static_cast<std::size_t>(d.n_ag - 1)), pic(static_cast<std::size_t>(d.n_ag - 1));
  for (int i = 0; i < d.n_ag - 1; ++i) {
    for (int j = 0; j < d.n_ag; ++j) {
      pid[static_cast<std::size_t>(i)].push_back(lh(i, j) * AffineMatrix::variable(lay, v.k[static_cast<std::size_t>(j)]));
      if (d.nc > 0) {
        pic[static_cast<std::size_t>(i)].push_back(lh(i, j) * AffineMatrix::variable(lay, v.f[static_cast<std::size_t>(j)]));
      }
    }
  }
  const AffineMatrix pi_d = AffineMatrix::from_blocks(pid);

  const AffineMatrix ap = prob.reduced.a_r.transpose() * p_s_big;
  const AffineMatrix pdc = pi_d * prob.reduced.c_r;
  const AffineMatrix phi11 = ap + ap.transpose() + pdc + pdc.transpose();

  Pieces out;
  if (d.ncc > 0) {
    const AffineMatrix pi_c = AffineMatrix::from_blocks(pic);
    const AffineMatrix phi12 = prob.reduced.c_r.transpose() * z_big.transpose() + pi_c;
    const AffineMatrix phi22 = w_big + w_big.transpose();
    out.phi = AffineMatrix::from_blocks({{phi11, phi12}, {phi12.transpose(), phi22}});
    out.p = AffineMatrix::block_diag({p_s_big, p_c_big});
  } else {
    out.phi = phi11;
    out.p = p_s_big;
  }
  return out;
}

void add_side_pencils(const SynthesisProblem & prob, const Dims & d, BuiltLmi & b)
{
  const VariableLayout & lay = b.vars.layout;
  b.problem.pencils.push_back(Pencil::from_affine("p_s_positive", -1.0 * AffineMatrix::variable(lay, b.vars.p_s)));
  for (std::size_t i = 0; i < b.vars.p_c.size(); ++i) {
    b.problem.pencils.push_back(
      Pencil::from_affine("p_c" + std::to_string(i + 1) + "_positive", -1.0 * AffineMatrix::variable(lay, b.vars.p_c[i])));
  }
  for (std::size_t j = 0; j < 5; ++j) {
    if (b.vars.tau[j] < 0) { continue; }
    b.problem.pencils.push_back(Pencil::from_affine("tau" + std::to_string(j + 1) + "_positive",
                                                    -1.0 * AffineMatrix::variable(lay, b.vars.tau[j])));
  }
  const double r = prob.options.controller_pole_radius;
  if (r > 0.0 && d.nc > 0) {
    for (std::size_t i = 0; i < b.vars.p_c.size(); ++i) {
      const AffineMatrix pc = AffineMatrix::variable(lay, b.vars.p_c[i]);
      const AffineMatrix w = AffineMatrix::variable(lay, b.vars.w[i]);
      const AffineMatrix off = r * pc + w;
      const AffineMatrix m = AffineMatrix::from_blocks({{-r * pc, off}, {off.transpose(), -r * pc}});
      b.problem.pencils.push_back(Pencil::from_affine("pole_region" + std::to_string(i + 1), m));
    }
  }
}

void finalize(const SynthesisProblem & prob, BuiltLmi & b)
{
  const VariableLayout & lay = b.vars.layout;
  b.problem.n_vars = lay.n_scalars();
  b.problem.var_names = lay.scalar_names();
  b.problem.objective = Vector::Zero(b.problem.n_vars);
  b.problem.objective(lay.index(b.vars.rho2, 0, 0)) = 1.0;
  for (int g : b.vars.gamma_hat) { b.problem.objective(lay.index(g, 0, 0)) = 1.0; }
  b.problem.box = prob.options.box;
  b.problem.apply_relative_margin(prob.options.margin_eps);
  b.problem.validate();
}

AffineMatrix gamma_hat_affine(const SynthesisProblem & prob, const SynthesisVariables & v)
{
  AffineMatrix g(prob.h_hat.rows(), prob.h_hat.rows());
  for (std::size_t i = 0; i < v.gamma_hat.size(); ++i) {
    g += AffineMatrix::scalar_times(v.layout.index(v.gamma_hat[i], 0, 0), gamma_selector(prob, static_cast<int>(i)));
  }
  return g;
}

}  // namespace

BuiltLmi build_theorem1(const SynthesisProblem & prob)
{
  prob.validate();
  const Dims d = dims_of(prob);
  BuiltLmi b;
  b.mode = SynthesisMode::kTheorem1;
  b.vars = make_layout(d, SynthesisMode::kTheorem1);
  const VariableLayout & lay = b.vars.layout;
  const Pieces pc = common_pieces(prob, d, b.vars);
  const Selectors sel = selectors(prob, d);
  auto tau_idx = [&](int j) { return lay.index(b.vars.tau[static_cast<std::size_t>(j - 1)], 0, 0); };
  auto has_tau = [&](int j) { return b.vars.tau[static_cast<std::size_t>(j - 1)] >= 0; };

  // uncertainty block
  const auto & bd = prob.bounds;
  const Matrix out_shape = output_delta_shape(prob);
  auto top_left = [&](double coef) {
    Matrix m = Matrix::Zero(d.ncl, d.ncl);
    m.topLeftCorner(d.nr, d.nr) = coef * out_shape;
    return m;
  };
  auto bottom_right = [&](double coef) {
    Matrix m = Matrix::Zero(d.ncl, d.ncl);
    m.bottomRightCorner(d.ncc, d.ncc) = coef * Matrix::Identity(d.ncc, d.ncc);
    return m;
  };
  AffineMatrix delta(d.ncl, d.ncl);
  delta += AffineMatrix::scalar_times(tau_idx(2), top_left(bd.delta_dc * bd.delta_dc));
  if (has_tau(4)) { delta += AffineMatrix::scalar_times(tau_idx(4), top_left(bd.delta_bc * bd.delta_bc)); }
  if (has_tau(1)) { delta += AffineMatrix::scalar_times(tau_idx(1), bottom_right(bd.delta_cc * bd.delta_cc)); }
  if (has_tau(3)) { delta += AffineMatrix::scalar_times(tau_idx(3), bottom_right(bd.delta_ac * bd.delta_ac)); }

  const AffineMatrix top = pc.phi + delta + AffineMatrix(q_tilde(prob));
  const int rho = lay.index(b.vars.rho2, 0, 0);
  auto neg_tau_eye = [&](int j, Eigen::Index size) {
    return AffineMatrix::scalar_times(tau_idx(j), -Matrix::Identity(size, size));
  };

  std::vector<AffineMatrix> cols, diags;
  cols.push_back(pc.p);
  diags.push_back(AffineMatrix::scalar_times(rho, -Matrix::Identity(d.ncl, d.ncl)));
  if (has_tau(1)) {
    cols.push_back(pc.p * sel.lb);
    diags.push_back(neg_tau_eye(1, sel.lb.cols()));
  }
  cols.push_back(pc.p * sel.lb);
  diags.push_back(neg_tau_eye(2, sel.lb.cols()));
  if (has_tau(3)) {
    cols.push_back(pc.p * sel.e0i);
    diags.push_back(neg_tau_eye(3, d.ncc));
  }
  if (has_tau(4)) {
    cols.push_back(pc.p * sel.e0i);
    diags.push_back(neg_tau_eye(4, d.ncc));
  }
  cols.push_back(pc.p * sel.ei0);
  diags.push_back(neg_tau_eye(5, d.nr));
  cols.push_back(AffineMatrix::scalar_times(tau_idx(5), sel.eh));
  diags.push_back(-1.0 * gamma_hat_affine(prob, b.vars));

  b.problem.pencils.push_back(Pencil::from_affine("grand", assemble_symmetric(top, cols, diags)));
  b.grand_index = 0;
  add_side_pencils(prob, d, b);
  finalize(prob, b);
  return b;
}

BuiltLmi build_corollary1(const SynthesisProblem & prob)
{
  prob.validate();
  const Dims d = dims_of(prob);
  BuiltLmi b;
  b.mode = SynthesisMode::kCorollary1;
  b.vars = make_layout(d, SynthesisMode::kCorollary1);
  const VariableLayout & lay = b.vars.layout;
  const Pieces pc = common_pieces(prob, d, b.vars);
  const Selectors sel = selectors(prob, d);
  const int tau1 = lay.index(b.vars.tau[0], 0, 0);
  const int rho = lay.index(b.vars.rho2, 0, 0);

  const AffineMatrix top = pc.phi + AffineMatrix(q_tilde(prob));
  std::vector<AffineMatrix> cols{pc.p, pc.p * sel.ei0, AffineMatrix::scalar_times(tau1, sel.eh)};
  std::vector<AffineMatrix> diags{AffineMatrix::scalar_times(rho, -Matrix::Identity(d.ncl, d.ncl)),
                                  AffineMatrix::scalar_times(tau1, -Matrix::Identity(d.nr, d.nr)),
                                  -1.0 * gamma_hat_affine(prob, b.vars)};
  b.problem.pencils.push_back(Pencil::from_affine("grand", assemble_symmetric(top, cols, diags)));
  b.grand_index = 0;
  add_side_pencils(prob, d, b);
  finalize(prob, b);
  return b;
}

BuiltLmi build_lmi(const SynthesisProblem & problem, SynthesisMode mode)
{
  return mode == SynthesisMode::kTheorem1 ? build_theorem1(problem) : build_corollary1(problem);
}

StructuredPoint structured_point(const BuiltLmi & built, const Vector & x)
{
  const SynthesisVariables & v = built.vars;
  const VariableLayout & lay = v.layout;
  StructuredPoint pt;
  pt.p_s = lay.value(x, v.p_s);
  for (int id : v.p_c) { pt.p_c.push_back(lay.value(x, id)); }
  for (int id : v.w) { pt.w.push_back(lay.value(x, id)); }
  for (int id : v.z) { pt.z.push_back(lay.value(x, id)); }
  for (int id : v.f) { pt.f.push_back(lay.value(x, id)); }
  for (int id : v.k) { pt.k.push_back(lay.value(x, id)); }
  for (std::size_t j = 0; j < 5; ++j) { pt.tau[j] = v.tau[j] >= 0 ? x(lay.index(v.tau[j], 0, 0)) : 0.0; }
  pt.rho2 = x(lay.index(v.rho2, 0, 0));
  for (int id : v.gamma_hat) { pt.gamma_hat.push_back(x(lay.index(id, 0, 0))); }
  return pt;
}

Matrix certificate_p(const StructuredPoint & pt, int n_agents)
{
  std::vector<Matrix> blocks(static_cast<std::size_t>(n_agents - 1), pt.p_s);
  for (const auto & pc : pt.p_c) { blocks.push_back(pc); }
  return block_diag(blocks);
}

Matrix q_tilde(const SynthesisProblem & problem)
{
  std::vector<Matrix> blocks = problem.weights.r;
  for (const auto & q : problem.weights.q) { blocks.push_back(q); }
  return block_diag(blocks);
}

Matrix delta_block(const SynthesisProblem & problem, const std::array<double, 5> & tau)
{
  const Dims d = dims_of(problem);
  const auto & bd = problem.bounds;
  Matrix m = Matrix::Zero(d.ncl, d.ncl);
  m.topLeftCorner(d.nr, d.nr) =
    (tau[1] * bd.delta_dc * bd.delta_dc + tau[3] * bd.delta_bc * bd.delta_bc) * output_delta_shape(problem);
  m.bottomRightCorner(d.ncc, d.ncc) =
    (tau[0] * bd.delta_cc * bd.delta_cc + tau[2] * bd.delta_ac * bd.delta_ac) * Matrix::Identity(d.ncc, d.ncc);
  return m;
}

ControllerRealization recover_controllers(const SynthesisProblem & problem, const BuiltLmi & built, const Vector & x)
{
  const Dims d = dims_of(problem);
  const StructuredPoint pt = structured_point(built, x);
  Eigen::LLT<Matrix> ps_llt(pt.p_s);
  if (ps_llt.info() != Eigen::Success || min_eig_sym(pt.p_s) <= 0.0) {
    throw NumericalError("recovery: p_s is not positive definite");
  }
  ControllerRealization c;
  c.order = d.nc;
  for (int i = 0; i < d.n_ag; ++i) {
    const auto si = static_cast<std::size_t>(i);
    const Matrix & bi = problem.mas.agents[si].b;
    const Matrix bi_pinv = pinv(bi);
    if (d.nc > 0) {
      Eigen::LLT<Matrix> pc_llt(pt.p_c[si]);
      if (pc_llt.info() != Eigen::Success || min_eig_sym(pt.p_c[si]) <= 0.0) {
        throw NumericalError("recovery: P_c" + std::to_string(i + 1) + " is not positive definite");
      }
      c.a_c.push_back(pc_llt.solve(pt.w[si]));
      c.b_c.push_back(pc_llt.solve(pt.z[si]));
      c.c_c.push_back(bi_pinv * ps_llt.solve(pt.f[si]));
    } else {
      c.a_c.push_back(Matrix(0, 0));
      c.b_c.push_back(Matrix(0, d.q));
      c.c_c.push_back(Matrix(d.m, 0));
    }
    c.d_c.push_back(bi_pinv * ps_llt.solve(pt.k[si]));

    auto rel = [&](const Matrix & target, const Matrix & gain) {
      return (pt.p_s * bi * gain - target).norm() / std::max(1.0, target.norm());
    };
    c.residual_c.push_back(d.nc > 0 ? rel(pt.f[si], c.c_c.back()) : 0.0);
    c.residual_d.push_back(rel(pt.k[si], c.d_c.back()));
  }
  c.robustness_degrees = robustness_degrees(built, x);
  return c;
}

std::vector<double> robustness_degrees(const BuiltLmi & built, const Vector & x)
{
  const StructuredPoint pt = structured_point(built, x);
  const double tau = built.mode == SynthesisMode::kTheorem1 ? pt.tau[4] : pt.tau[0];
  if (!(tau > 0.0)) { throw std::invalid_argument("robustness degrees: multiplier must be positive"); }
  std::vector<double> out;
  for (double g : pt.gamma_hat) {
    if (!(g > 0.0)) { throw std::invalid_argument("robustness degrees: gamma_hat must be positive"); }
    out.push_back(std::sqrt(tau / g));
  }
  return out;
}

SynthesisResult make_result(const SynthesisProblem & problem, const BuiltLmi & built, const Vector & x)
{
  SynthesisResult r;
  r.mode = built.mode;
  r.x = x;
  const StructuredPoint pt = structured_point(built, x);
  r.controllers = recover_controllers(problem, built, x);
  r.rho_squared = pt.rho2;
  r.rho = std::sqrt(std::max(0.0, pt.rho2));
  r.gamma_hat = pt.gamma_hat;
  if (built.mode == SynthesisMode::kTheorem1) {
    r.tau.assign(pt.tau.begin(), pt.tau.end());
  } else {
    r.tau = {pt.tau[0]};
  }
  r.p_bar_s = pt.p_s;
  r.p_c = pt.p_c;
  r.lmi_residual = max_eig_sym(evaluate_pencil(built.problem, built.grand_index, x));
  r.max_violation = max_constraint_violation(built.problem, x);
  r.objective = built.problem.objective.dot(x);
  r.recovery_consistent = r.controllers.max_residual() <= problem.options.recovery_threshold;
  return r;
}

SynthesisResult synthesize(const SynthesisProblem & problem, SynthesisMode mode,
                           const std::optional<ControllerRealization> & seed)
{
  const BuiltLmi built = build_lmi(problem, mode);
  const SolverSolution sol = solve(built.problem, problem.options.solver);
  SynthesisResult result;
  result.mode = mode;
  if (!sol.ok()) {
    result.status = sol.status;
    result.message = sol.message;
    result.infeasibility_certificate = sol.infeasibility_certificate;
    result.solver_iterations = sol.stats.iterations;
    result.solver_runtime = sol.stats.runtime_seconds;
    result.x = sol.x;
    return result;
  }
  result = make_result(problem, built, sol.x);
  result.status = sol.status;
  result.message = sol.message;
  result.solver_iterations = sol.stats.iterations;
  result.solver_runtime = sol.stats.runtime_seconds;
  if (result.recovery_consistent) { return result; }

  result.warnings.push_back("controller recovery residual " + std::to_string(result.controllers.max_residual()) +
                            " exceeds threshold " + std::to_string(problem.options.recovery_threshold) +
                            "; recovered gains do not reproduce the solved f_i, k_i");
  if (!problem.options.consistent_recovery) { return result; }

  ControllerRealization start;
  if (seed) {
    start = *seed;
  } else if (mode == SynthesisMode::kTheorem1) {
    const SynthesisResult nominal = synthesize(problem, SynthesisMode::kCorollary1);
    start = (nominal.feasible() && nominal.recovery_consistent) ? nominal.controllers : lqr_output_seed(problem);
  } else {
    start = lqr_output_seed(problem);
  }

  RefinementReport report;
  const std::optional<Vector> refined = refine_recovery(problem, built, start, report);
  if (!refined) {
    result.refinement = report;
    result.warnings.push_back("consistent-recovery refinement failed: " + report.message);
    return result;
  }
  SynthesisResult out = make_result(problem, built, *refined);
  out.status = out.max_violation <= problem.options.solver.post_check_tol ? SolveStatus::kOptimal
                                                                          : SolveStatus::kNumericalFailure;
  out.message = "refined: " + report.message;
  out.refinement = report;
  out.solver_iterations = result.solver_iterations;
  out.solver_runtime = result.solver_runtime;
  if (!out.recovery_consistent) {
    out.warnings.push_back("refined recovery residual " + std::to_string(out.controllers.max_residual()) +
                           " still exceeds threshold");
  }
  return out;
}

bool VerificationReport::all_passed() const
{
  return std::all_of(checks.begin(), checks.end(), [](const CheckItem & c) { return !c.evaluated || c.passed; });
}

const CheckItem * VerificationReport::find(const std::string & name) const
{
  for (const auto & c : checks) {
    if (c.name == name) { return &c; }
  }
  return nullptr;
}

VerificationReport verify_synthesis(const SynthesisProblem & problem, const SynthesisResult & result,
                                    const ControllerRealization & ctrl)
{
  VerificationReport rep;
  const BuiltLmi built = build_lmi(problem, result.mode);
  const double tol = problem.options.solver.post_check_tol;
  const Dims d = dims_of(problem);

  CheckItem grand{"grand_pencil", true, false, 0.0, ""};
  const Pencil & gp = built.problem.pencils[static_cast<std::size_t>(built.grand_index)];
  if (result.x.size() != built.problem.n_vars) {
    grand.detail = "decision vector length does not match the layout";
    rep.checks.push_back(grand);
    return rep;
  }
  const Matrix g = evaluate_pencil(built.problem, built.grand_index, result.x);
  grand.value = max_eig_sym(g);
  grand.passed = grand.value <= -gp.margin + tol;
  grand.detail = "max eigenvalue of the solved pencil; margin " + std::to_string(gp.margin);
  rep.checks.push_back(grand);

  const Matrix a_phi = build_a_phi(problem.reduced, ctrl, problem.mas);
  CheckItem hurwitz{"a_phi_hurwitz", true, false, spectral_abscissa(a_phi), "spectral abscissa of the nominal reduced loop"};
  hurwitz.passed = hurwitz.value < 0.0;
  rep.checks.push_back(hurwitz);

  const StructuredPoint pt = structured_point(built, result.x);
  const Matrix p = certificate_p(pt, d.n_ag);
  const Matrix qt = q_tilde(problem);
  const Matrix lyap = a_phi.transpose() * p + p * a_phi;
  CheckItem nominal{"lyapunov_nominal", true, false, max_eig_sym(lyap + qt, 1e-6),
                    "max eigenvalue of A_Phi^T P + P A_Phi + Q_tilde"};
  nominal.passed = nominal.value <= tol;
  rep.checks.push_back(nominal);

  CheckItem omega{"omega_reconstruction", false, false, 0.0, ""};
  CheckItem schur{"schur_cross_check", false, false, 0.0, ""};
  if (result.mode == SynthesisMode::kCorollary1) {
    omega.detail = schur.detail = "skipped: nominal variant has no uncertainty channels";
  } else {
    const Selectors sel = selectors(problem, d);
    Matrix gh = Matrix::Zero(d.v, d.v);
    for (std::size_t i = 0; i < pt.gamma_hat.size(); ++i) { gh += pt.gamma_hat[i] * gamma_selector(problem, static_cast<int>(i)); }
    // tau_5 H^T Gamma_{N-1}^-1 H with Gamma_{N-1} = Gamma_hat / tau_5
    const Matrix nl_term = pt.tau[4] * pt.tau[4] * sel.eh * gh.inverse() * sel.eh.transpose();
    const Matrix top = lyap + qt + delta_block(problem, pt.tau) + nl_term;
    std::vector<Matrix> cols{p}, diags{-pt.rho2 * Matrix::Identity(d.ncl, d.ncl)};
    const auto nu = sel.lb.cols();
    if (d.nc > 0) {
      cols.push_back(p * sel.lb);
      diags.push_back(-pt.tau[0] * Matrix::Identity(nu, nu));
    }
    cols.push_back(p * sel.lb);
    diags.push_back(-pt.tau[1] * Matrix::Identity(nu, nu));
    if (d.nc > 0) {
      cols.push_back(p * sel.e0i);
      diags.push_back(-pt.tau[2] * Matrix::Identity(d.ncc, d.ncc));
      cols.push_back(p * sel.e0i);
      diags.push_back(-pt.tau[3] * Matrix::Identity(d.ncc, d.ncc));
    }
    cols.push_back(p * sel.ei0);
    diags.push_back(-pt.tau[4] * Matrix::Identity(d.nr, d.nr));
    const Matrix om = assemble_symmetric(top, cols, diags);
    omega.evaluated = true;
    omega.value = max_eig_sym(om, 1e-6);
    omega.passed = omega.value < 0.0;
    omega.detail = "max eigenvalue of the bilinear form at the recovered controller";

    const auto k = g.rows() - d.v;
    const Matrix g22 = g.bottomRightCorner(d.v, d.v);
    const Matrix s = g.topLeftCorner(k, k) - g.topRightCorner(k, d.v) * g22.inverse() * g.bottomLeftCorner(d.v, k);
    schur.evaluated = true;
    schur.value = (s - om).norm() / std::max(1.0, om.norm());
    schur.passed = schur.value <= tol;
    schur.detail = "relative Frobenius mismatch between the Schur complement of the last block and the bilinear form";
  }
  rep.checks.push_back(omega);
  rep.checks.push_back(schur);
  return rep;
}

}  // namespace consynth
