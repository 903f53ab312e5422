#include "consynth/sdp_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

namespace consynth {

std::string to_string(SolveStatus s)
{
  switch (s) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kFeasible: return "feasible";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kNumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

SolverOptions SolverOptions::from_env()
{
  SolverOptions o;
  if (const char * v = std::getenv("CONSYNTH_SOLVER_VERBOSE")) { o.verbose = std::string(v) != "0" && !std::string(v).empty(); }
  return o;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// One semidefinite block of the conic form: Z = C - sum_j y_j A_j >= 0.
struct DenseBlock
{
  int s = 0;
  Matrix c;
  /// column j is vec(A_j), column-major
  Matrix a_vec;
};

/// Dual-form data: max b^T y s.t. dense blocks and the LP rows c_lp - A_lp y >= 0.
struct Conic
{
  int d = 0;
  std::vector<DenseBlock> blocks;
  Vector c_lp;
  Matrix a_lp;
  Vector b;
};

/// x = x0 + basis * y
struct Reduction
{
  Vector x0;
  Matrix basis;
};

Reduction eliminate_equalities(const LmiProblem & p, bool & consistent)
{
  Reduction r;
  consistent = true;
  if (p.eq_a.rows() == 0) {
    r.x0 = Vector::Zero(p.n_vars);
    r.basis = Matrix::Identity(p.n_vars, p.n_vars);
    return r;
  }
  Eigen::JacobiSVD<Matrix> svd(p.eq_a, Eigen::ComputeFullV | Eigen::ComputeThinU);
  const Vector & s = svd.singularValues();
  const double smax = s.size() > 0 ? s(0) : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > 1e-10 * std::max(1.0, smax)) { ++rank; }
  }
  Vector s_inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < rank; ++i) { s_inv(i) = 1.0 / s(i); }
  r.x0 = svd.matrixV().leftCols(s.size()) * (s_inv.asDiagonal() * (svd.matrixU().transpose() * p.eq_b));
  const double res = (p.eq_a * r.x0 - p.eq_b).norm();
  consistent = res <= 1e-8 * std::max(1.0, p.eq_b.norm());
  r.basis = svd.matrixV().rightCols(p.n_vars - rank);
  return r;
}

Conic build_conic(const LmiProblem & p, const Reduction & red)
{
  Conic k;
  k.d = static_cast<int>(red.basis.cols());
  const int n = p.n_vars;
  std::vector<std::pair<Vector, double>> lp_rows;  // (a, c): c - a^T y >= 0

  for (const auto & pen : p.pencils) {
    const int s = pen.dim();
    if (s == 0) { continue; }
    // f0 + sum x_k F_k <= -margin I with x = x0 + N y
    Matrix f0 = pen.f0;
    Matrix f_vec = Matrix::Zero(static_cast<Eigen::Index>(s) * s, n);
    for (const auto & t : pen.terms) {
      f0 += red.x0(t.var) * t.coeff;
      f_vec.col(t.var) += Eigen::Map<const Vector>(t.coeff.data(), t.coeff.size());
    }
    Matrix c = -f0 - pen.margin * Matrix::Identity(s, s);
    Matrix a_vec = f_vec * red.basis;
    if (s == 1) {
      lp_rows.emplace_back(a_vec.row(0).transpose(), c(0, 0));
      continue;
    }
    double sc = c.norm();
    for (Eigen::Index j = 0; j < a_vec.cols(); ++j) { sc = std::max(sc, a_vec.col(j).norm()); }
    if (sc == 0.0) { sc = 1.0; }
    DenseBlock blk;
    blk.s = s;
    blk.c = c / sc;
    blk.a_vec = a_vec / sc;
    k.blocks.push_back(std::move(blk));
  }
  if (std::isfinite(p.box) && p.box > 0.0) {
    for (int i = 0; i < n; ++i) {
      const Vector row = red.basis.row(i).transpose();
      if (row.cwiseAbs().maxCoeff() == 0.0) { continue; }
      lp_rows.emplace_back(row, p.box - red.x0(i));
      lp_rows.emplace_back(-row, p.box + red.x0(i));
    }
  }
  k.c_lp.resize(static_cast<Eigen::Index>(lp_rows.size()));
  k.a_lp.resize(static_cast<Eigen::Index>(lp_rows.size()), k.d);
  for (std::size_t i = 0; i < lp_rows.size(); ++i) {
    double sc = std::max(std::abs(lp_rows[i].second), lp_rows[i].first.norm());
    if (sc == 0.0) { sc = 1.0; }
    k.c_lp(static_cast<Eigen::Index>(i)) = lp_rows[i].second / sc;
    k.a_lp.row(static_cast<Eigen::Index>(i)) = lp_rows[i].first.transpose() / sc;
  }
  k.b = -(red.basis.transpose() * p.objective);
  return k;
}

struct Iterate
{
  std::vector<Matrix> x, z;
  Vector xl, zl;
  Vector y;
};

struct Direction
{
  std::vector<Matrix> dx, dz;
  Vector dxl, dzl;
  Vector dy;
};

Matrix mat(const Vector & v, int s) { return Eigen::Map<const Matrix>(v.data(), s, s); }

Vector apply_a(const Conic & k, const std::vector<Matrix> & x, const Vector & xl)
{
  Vector out = k.a_lp.transpose() * xl;
  for (std::size_t b = 0; b < k.blocks.size(); ++b) {
    out += k.blocks[b].a_vec.transpose() * Eigen::Map<const Vector>(x[b].data(), x[b].size());
  }
  return out;
}

Matrix apply_at(const DenseBlock & blk, const Vector & y) { return mat(blk.a_vec * y, blk.s); }

Matrix sym(const Matrix & a) { return 0.5 * (a + a.transpose()); }

/// Largest alpha with x + alpha dx >= 0 (kInf if unbounded), x assumed PD.
double max_step(const Matrix & x, const Matrix & dx)
{
  Eigen::LLT<Matrix> llt(x);
  if (llt.info() != Eigen::Success) { return 0.0; }
  Matrix w = llt.matrixL().solve(dx);
  w = llt.matrixL().solve(w.transpose()).transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(w), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  return lmin >= 0.0 ? kInf : -1.0 / lmin;
}

double max_step_lp(const Vector & x, const Vector & dx)
{
  double a = kInf;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (dx(i) < 0.0) { a = std::min(a, -x(i) / dx(i)); }
  }
  return a;
}

Matrix inverse_spd(const Matrix & a, bool & ok)
{
  Eigen::LLT<Matrix> llt(a);
  ok = llt.info() == Eigen::Success;
  if (!ok) { return Matrix(); }
  return sym(llt.solve(Matrix::Identity(a.rows(), a.cols())));
}

struct IpmResult
{
  Vector y;
  bool converged = false;
  int iterations = 0;
  double pinf = 0.0, dinf = 0.0, gap = 0.0;
  std::string message;
};

IpmResult run_ipm(const Conic & k, const SolverOptions & opt)
{
  IpmResult res;
  const int d = k.d;
  const std::size_t nb = k.blocks.size();
  const Eigen::Index nl = k.c_lp.size();

  double n_total = static_cast<double>(nl);
  for (const auto & blk : k.blocks) { n_total += blk.s; }

  Iterate it;
  it.y = Vector::Zero(d);
  double b_max = k.b.size() > 0 ? k.b.cwiseAbs().maxCoeff() : 0.0;
  for (const auto & blk : k.blocks) {
    double a_min_norm = kInf;
    double a_max_norm = 0.0;
    for (int j = 0; j < d; ++j) {
      const double nj = blk.a_vec.col(j).norm();
      a_min_norm = std::min(a_min_norm, 1.0 + nj);
      a_max_norm = std::max(a_max_norm, 1.0 + nj);
    }
    const double s = blk.s;
    const double xi = std::max({10.0, std::sqrt(s), d > 0 ? s * (1.0 + b_max) / a_min_norm : 10.0});
    const double eta = std::max({10.0, std::sqrt(s), a_max_norm, 1.0 + blk.c.norm()});
    it.x.push_back(xi * Matrix::Identity(blk.s, blk.s));
    it.z.push_back(eta * Matrix::Identity(blk.s, blk.s));
  }
  it.xl = Vector::Constant(nl, std::max(10.0, 1.0 + b_max));
  it.zl = Vector::Constant(nl, 10.0);

  const double norm_b = k.b.norm();
  double norm_c = k.c_lp.norm();
  for (const auto & blk : k.blocks) { norm_c = std::max(norm_c, blk.c.norm()); }

  double step_p = 1.0, step_d = 1.0;
  int stall = 0;
  double best_dinf = kInf;

  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    res.iterations = iter + 1;
    // residuals
    std::vector<Matrix> rd(nb), zinv(nb);
    double dinf2 = 0.0;
    double pobj = k.c_lp.dot(it.xl);
    double xz = it.xl.dot(it.zl);
    for (std::size_t b = 0; b < nb; ++b) {
      const DenseBlock & blk = k.blocks[b];
      rd[b] = blk.c - it.z[b] - apply_at(blk, it.y);
      dinf2 += rd[b].squaredNorm();
      pobj += (blk.c.array() * it.x[b].array()).sum();
      xz += (it.x[b].array() * it.z[b].array()).sum();
      bool ok = true;
      zinv[b] = inverse_spd(it.z[b], ok);
      if (!ok) {
        res.message = "dual slack lost definiteness";
        return res;
      }
    }
    const Vector rdl = k.c_lp - it.zl - k.a_lp * it.y;
    dinf2 += rdl.squaredNorm();
    const Vector rp = k.b - apply_a(k, it.x, it.xl);
    const double dobj = k.b.dot(it.y);
    const double mu = xz / n_total;

    res.pinf = rp.norm() / (1.0 + norm_b);
    res.dinf = std::sqrt(dinf2) / (1.0 + norm_c);
    res.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    res.y = it.y;
    if (opt.verbose) {
      std::fprintf(stderr, "ipm %3d  pobj % .8e  dobj % .8e  gap %.2e  pinf %.2e  dinf %.2e  mu %.2e  steps %.3f %.3f\n",
                   iter, pobj, dobj, res.gap, res.pinf, res.dinf, mu, step_p, step_d);
    }
    if (res.gap < opt.tol && res.pinf < opt.tol && res.dinf < opt.tol) {
      res.converged = true;
      res.message = "converged";
      return res;
    }
    if (!std::isfinite(mu) || !std::isfinite(pobj) || !std::isfinite(dobj)) {
      res.message = "non-finite iterate";
      return res;
    }
    if (std::abs(pobj) > 1e14 && res.dinf > 1e-6 && iter > 10) {
      res.message = "primal objective diverging (dual side infeasible)";
      return res;
    }
    if (res.dinf < best_dinf) { best_dinf = res.dinf; }

    // Schur complement M_ij = <A_i, X A_j Z^-1>
    Matrix m = Matrix::Zero(d, d);
    for (std::size_t b = 0; b < nb; ++b) {
      const DenseBlock & blk = k.blocks[b];
      const int s = blk.s;
      Eigen::Map<const Matrix> a_cat(blk.a_vec.data(), s, static_cast<Eigen::Index>(s) * d);
      const Matrix xa = it.x[b] * a_cat;
      Matrix g(static_cast<Eigen::Index>(s) * s, d);
      for (int j = 0; j < d; ++j) {
        Eigen::Map<Matrix> gj(g.col(j).data(), s, s);
        gj.noalias() = xa.middleCols(static_cast<Eigen::Index>(j) * s, s) * zinv[b];
      }
      m.noalias() += blk.a_vec.transpose() * g;
    }
    const Vector dl = it.xl.cwiseQuotient(it.zl);
    m.noalias() += k.a_lp.transpose() * dl.asDiagonal() * k.a_lp;
    m = sym(m);

    Eigen::LLT<Matrix> chol(m);
    Eigen::LDLT<Matrix> ldlt;
    bool use_ldlt = chol.info() != Eigen::Success;
    if (use_ldlt) {
      const double reg = 1e-12 * std::max(1.0, m.diagonal().cwiseAbs().maxCoeff());
      ldlt.compute(m + reg * Matrix::Identity(d, d));
      if (ldlt.info() != Eigen::Success) {
        res.message = "Schur complement factorization failed";
        return res;
      }
    }
    auto solve_m = [&](const Vector & r) -> Vector { return use_ldlt ? Vector(ldlt.solve(r)) : Vector(chol.solve(r)); };

    // base term A(X R_d Z^-1) shared by predictor and corrector
    std::vector<Matrix> xrdz(nb);
    for (std::size_t b = 0; b < nb; ++b) { xrdz[b] = it.x[b] * rd[b] * zinv[b]; }
    const Vector xrdz_l = it.xl.cwiseProduct(rdl).cwiseQuotient(it.zl);

    auto direction = [&](const std::vector<Matrix> & rc, const Vector & rcl) {
      Direction dir;
      std::vector<Matrix> tmp(nb);
      for (std::size_t b = 0; b < nb; ++b) { tmp[b] = rc[b] - xrdz[b]; }
      const Vector rhs = rp - apply_a(k, tmp, rcl - xrdz_l);
      dir.dy = solve_m(rhs);
      dir.dz.resize(nb);
      dir.dx.resize(nb);
      for (std::size_t b = 0; b < nb; ++b) {
        dir.dz[b] = rd[b] - apply_at(k.blocks[b], dir.dy);
        dir.dx[b] = rc[b] - sym(it.x[b] * dir.dz[b] * zinv[b]);
      }
      dir.dzl = rdl - k.a_lp * dir.dy;
      dir.dxl = rcl - it.xl.cwiseProduct(dir.dzl).cwiseQuotient(it.zl);
      return dir;
    };

    auto step_lengths = [&](const Direction & dir, double & ap, double & ad) {
      ap = max_step_lp(it.xl, dir.dxl);
      ad = max_step_lp(it.zl, dir.dzl);
      for (std::size_t b = 0; b < nb; ++b) {
        ap = std::min(ap, max_step(it.x[b], dir.dx[b]));
        ad = std::min(ad, max_step(it.z[b], dir.dz[b]));
      }
    };

    // predictor
    std::vector<Matrix> rc(nb);
    for (std::size_t b = 0; b < nb; ++b) { rc[b] = -it.x[b]; }
    Vector rcl = -it.xl;
    Direction pred = direction(rc, rcl);
    double ap = 0.0, ad = 0.0;
    step_lengths(pred, ap, ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double xz_aff = (it.xl + ap * pred.dxl).dot(it.zl + ad * pred.dzl);
    for (std::size_t b = 0; b < nb; ++b) {
      xz_aff += ((it.x[b] + ap * pred.dx[b]).array() * (it.z[b] + ad * pred.dz[b]).array()).sum();
    }
    const double mu_aff = std::max(0.0, xz_aff / n_total);
    double sigma = std::pow(std::min(1.0, mu_aff / mu), 3.0);
    sigma = std::clamp(sigma, 0.0, 1.0);

    // corrector
    for (std::size_t b = 0; b < nb; ++b) {
      rc[b] = sigma * mu * zinv[b] - it.x[b] - sym(pred.dx[b] * pred.dz[b] * zinv[b]);
    }
    rcl = (sigma * mu * Vector::Ones(nl) - pred.dxl.cwiseProduct(pred.dzl)).cwiseQuotient(it.zl) - it.xl;
    Direction dir = direction(rc, rcl);
    step_lengths(dir, ap, ad);
    const double gamma = 0.9 + 0.09 * std::min(step_p, step_d);
    step_p = std::min(1.0, gamma * ap);
    step_d = std::min(1.0, gamma * ad);

    for (std::size_t b = 0; b < nb; ++b) {
      it.x[b] = sym(it.x[b] + step_p * dir.dx[b]);
      it.z[b] = sym(it.z[b] + step_d * dir.dz[b]);
    }
    it.xl += step_p * dir.dxl;
    it.zl += step_d * dir.dzl;
    it.y += step_d * dir.dy;

    if (step_p < 1e-8 && step_d < 1e-8) {
      if (++stall >= 3) {
        res.message = "step length stagnation";
        res.y = it.y;
        return res;
      }
    } else {
      stall = 0;
    }
  }
  res.y = it.y;
  res.message = "iteration limit reached";
  return res;
}

SolverSolution finish(const LmiProblem & p, const Vector & x, const SolverOptions & opt)
{
  SolverSolution sol;
  sol.x = x;
  sol.objective_value = p.objective.dot(x);
  sol.max_violation = max_constraint_violation(p, x);
  bool in_box = !std::isfinite(p.box) || x.size() == 0 || x.cwiseAbs().maxCoeff() <= p.box * (1.0 + 1e-9) + 1e-9;
  bool eq_ok = p.eq_a.rows() == 0 || (p.eq_a * x - p.eq_b).norm() <= 1e-7 * std::max(1.0, p.eq_b.norm());
  const bool pass = x.allFinite() && (p.pencils.empty() || sol.max_violation <= opt.post_check_tol) && in_box && eq_ok;
  sol.status = pass ? SolveStatus::kFeasible : SolveStatus::kNumericalFailure;
  return sol;
}

}  // namespace

SolverSolution solve(const LmiProblem & problem, const SolverOptions & options)
{
  const auto t0 = std::chrono::steady_clock::now();
  problem.validate();

  bool consistent = true;
  const Reduction red = eliminate_equalities(problem, consistent);
  SolverSolution sol;
  if (!consistent) {
    sol.x = red.x0;
    sol.status = SolveStatus::kInfeasible;
    sol.message = "linear equality constraints are inconsistent";
    return sol;
  }

  IpmResult ipm;
  if (red.basis.cols() > 0) {
    const Conic k = build_conic(problem, red);
    ipm = run_ipm(k, options);
  } else {
    ipm.converged = true;
    ipm.y = Vector::Zero(0);
    ipm.message = "no free variables";
  }
  const Vector x = red.x0 + red.basis * ipm.y;
  sol = finish(problem, x, options);
  sol.stats.iterations = ipm.iterations;
  sol.stats.primal_residual = ipm.pinf;
  sol.stats.dual_residual = ipm.dinf;
  sol.stats.relative_gap = ipm.gap;
  sol.message = ipm.message;

  const bool has_objective = problem.objective.size() > 0 && problem.objective.cwiseAbs().maxCoeff() > 0.0;
  if (sol.status == SolveStatus::kFeasible) {
    if (ipm.converged && has_objective) { sol.status = SolveStatus::kOptimal; }
    if (!ipm.converged) { sol.message += " (strictly feasible point returned without optimality certificate)"; }
  } else if (options.classify_infeasibility) {
    SolverOptions sub = options;
    sub.classify_infeasibility = false;
    const LmiProblem aux = with_slack(problem, {}, -1.0);
    const SolverSolution aux_sol = solve(aux, sub);
    if (aux_sol.x.size() == aux.n_vars && aux_sol.x.allFinite()) {
      const double t_star = aux_sol.x(problem.n_vars);
      if (aux_sol.ok() && t_star > options.post_check_tol) {
        sol.status = SolveStatus::kInfeasible;
        sol.infeasibility_certificate = t_star;
        sol.message = "infeasible: smallest achievable max(lambda_max + margin) over all constraints is " + std::to_string(t_star);
      } else if (aux_sol.ok()) {
        sol.message += "; auxiliary problem reaches t = " + std::to_string(t_star) + " so the failure is numerical";
      }
    }
  }
  sol.stats.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

}  // namespace consynth
