#include <cmath>
#include <complex>
#include <limits>

#include <Eigen/Eigenvalues>

#include "consynth/synthesis.hpp"

namespace consynth {

namespace {

/// Rows of eq_a x = eq_b.
struct EqBuilder
{
  int n_vars;
  std::vector<Vector> rows;
  std::vector<double> rhs;

  Vector & new_row(double b)
  {
    rows.emplace_back(Vector::Zero(n_vars));
    rhs.push_back(b);
    return rows.back();
  }

  void apply(LmiProblem & p) const
  {
    Matrix a(static_cast<Eigen::Index>(rows.size()), n_vars);
    Vector b(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      a.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
      b(static_cast<Eigen::Index>(r)) = rhs[r];
    }
    p.add_equalities(a, b);
  }
};

/// target = p_s * g as equalities in (target, p_s)
void add_product_equalities(EqBuilder & eq, const VariableLayout & lay, int target, int p_s, const Matrix & g)
{
  for (Eigen::Index r = 0; r < g.rows(); ++r) {
    for (Eigen::Index c = 0; c < g.cols(); ++c) {
      Vector & row = eq.new_row(0.0);
      row(lay.index(target, static_cast<int>(r), static_cast<int>(c))) += 1.0;
      for (Eigen::Index s = 0; s < g.rows(); ++s) {
        row(lay.index(p_s, static_cast<int>(r), static_cast<int>(s))) -= g(s, c);
      }
    }
  }
}

/// U^T target = 0 for an orthonormal basis U of the left null space of m
void add_range_equalities(EqBuilder & eq, const VariableLayout & lay, int target, const Matrix & m)
{
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU);
  const Eigen::Index rank = numerical_rank(m);
  const Matrix u = svd.matrixU().rightCols(m.rows() - rank);
  const VariableBlock & blk = lay.block(target);
  for (Eigen::Index k = 0; k < u.cols(); ++k) {
    for (int c = 0; c < blk.cols; ++c) {
      Vector & row = eq.new_row(0.0);
      for (int r = 0; r < blk.rows; ++r) { row(lay.index(target, r, c)) += u(r, k); }
    }
  }
}

struct StepOutcome
{
  Vector x;
  double t = 0.0;
};

std::optional<StepOutcome> run_step(const LmiProblem & base, int grand, const EqBuilder & eq, bool slack,
                                    const SolverOptions & opts)
{
  LmiProblem p = base;
  eq.apply(p);
  SolverOptions o = opts;
  o.classify_infeasibility = false;
  if (slack) {
    const LmiProblem ps = with_slack(p, {grand}, -1.0);
    const SolverSolution s = solve(ps, o);
    if (!s.ok()) { return std::nullopt; }
    return StepOutcome{s.x.head(base.n_vars), s.x(base.n_vars)};
  }
  const SolverSolution s = solve(p, o);
  if (!s.ok()) { return std::nullopt; }
  return StepOutcome{s.x, s.objective_value};
}

}  // namespace

std::optional<Vector> refine_recovery(const SynthesisProblem & problem, const BuiltLmi & built,
                                      const ControllerRealization & seed, RefinementReport & report)
{
  report = RefinementReport{};
  report.attempted = true;
  const SynthesisVariables & v = built.vars;
  const VariableLayout & lay = v.layout;
  const LmiProblem & base = built.problem;
  const RefinementOptions & ro = problem.options.refinement;
  const int n_ag = problem.mas.n_agents();
  const double tol = problem.options.solver.post_check_tol;
  const bool dynamic = problem.n_c > 0;

  std::vector<Matrix> cc = seed.c_c, dc = seed.d_c;
  if (static_cast<int>(dc.size()) != n_ag || (dynamic && static_cast<int>(cc.size()) != n_ag)) {
    report.message = "seed controller has the wrong number of agents";
    return std::nullopt;
  }

  bool slack = true;
  int stalled = 0;
  double best_t = std::numeric_limits<double>::infinity();
  double prev_obj = std::numeric_limits<double>::infinity();
  double best_obj = prev_obj;
  std::optional<Vector> best;

  for (int it = 0; it < ro.max_iterations; ++it) {
    report.iterations = it + 1;
    // fixed gains: f_i, k_i tied to p_s
    EqBuilder eb{base.n_vars, {}, {}};
    for (int i = 0; i < n_ag; ++i) {
      const auto si = static_cast<std::size_t>(i);
      const Matrix & bi = problem.mas.agents[si].b;
      if (dynamic) { add_product_equalities(eb, lay, v.f[si], v.p_s, bi * cc[si]); }
      add_product_equalities(eb, lay, v.k[si], v.p_s, bi * dc[si]);
    }
    const auto xb = run_step(base, built.grand_index, eb, slack, problem.options.solver);
    if (!xb) {
      report.message = "fixed-gain step failed at iteration " + std::to_string(it + 1);
      break;
    }
    const Matrix ps = lay.value(xb->x, v.p_s);

    // fixed p_s: f_i, k_i restricted to range(p_s B_i)
    EqBuilder ea{base.n_vars, {}, {}};
    for (int i = 0; i < lay.block(v.p_s).rows; ++i) {
      for (int j = i; j < lay.block(v.p_s).cols; ++j) { ea.new_row(ps(i, j))(lay.index(v.p_s, i, j)) = 1.0; }
    }
    for (int i = 0; i < n_ag; ++i) {
      const auto si = static_cast<std::size_t>(i);
      const Matrix psb = ps * problem.mas.agents[si].b;
      if (dynamic) { add_range_equalities(ea, lay, v.f[si], psb); }
      add_range_equalities(ea, lay, v.k[si], psb);
    }
    const auto xa = run_step(base, built.grand_index, ea, slack, problem.options.solver);
    if (!xa) {
      report.message = "fixed-Lyapunov step failed at iteration " + std::to_string(it + 1);
      break;
    }
    ControllerRealization ctrl;
    try {
      ctrl = recover_controllers(problem, built, xa->x);
    } catch (const NumericalError & e) {
      report.message = std::string("recovery failed: ") + e.what();
      break;
    }
    cc = ctrl.c_c;
    dc = ctrl.d_c;

    if (slack) {
      report.slack_history.push_back(xa->t);
      if (max_constraint_violation(base, xa->x) <= tol) {
        slack = false;
        best = xa->x;
        prev_obj = best_obj = base.objective.dot(xa->x);
        report.objective_history.push_back(prev_obj);
        continue;
      }
      if (xa->t > best_t - 1e-4) {
        if (++stalled >= ro.max_stalled) {
          report.message = "slack stalled at " + std::to_string(best_t);
          break;
        }
      } else {
        stalled = 0;
      }
      best_t = std::min(best_t, xa->t);
      continue;
    }

    const double obj = base.objective.dot(xa->x);
    report.objective_history.push_back(obj);
    if (max_constraint_violation(base, xa->x) <= tol && obj <= best_obj) {
      best = xa->x;
      best_obj = obj;
    }
    if (prev_obj - obj < ro.rel_tol * std::max(1.0, std::abs(obj))) {
      report.message = "converged after " + std::to_string(it + 1) + " iterations";
      break;
    }
    prev_obj = obj;
  }
  report.succeeded = best.has_value();
  if (report.succeeded && report.message.empty()) { report.message = "iteration limit reached"; }
  if (report.succeeded && report.message.rfind("converged", 0) != 0 &&
      report.message.rfind("iteration limit", 0) != 0) {
    report.message = "stopped early (" + report.message + "); keeping the best feasible point";
  }
  if (!report.succeeded && report.message.empty()) { report.message = "no strictly feasible consistent point found"; }
  return best;
}

Matrix solve_care(const Matrix & a, const Matrix & b, const Matrix & q, const Matrix & r)
{
  const auto n = a.rows();
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n || r.rows() != b.cols() || r.cols() != b.cols()) {
    throw DimensionError("solve_care: inconsistent shapes");
  }
  const Matrix g = b * r.ldlt().solve(b.transpose());
  Matrix h(2 * n, 2 * n);
  h << a, -g, -q, -a.transpose();
  Eigen::ComplexEigenSolver<Matrix> es(h);
  if (es.info() != Eigen::Success) { throw NumericalError("solve_care: eigen decomposition failed"); }
  Eigen::MatrixXcd stable(2 * n, n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    if (es.eigenvalues()(i).real() < 0.0) {
      if (k == n) { throw NumericalError("solve_care: Hamiltonian has too many stable eigenvalues"); }
      stable.col(k++) = es.eigenvectors().col(i);
    }
  }
  if (k != n) { throw NumericalError("solve_care: no stabilizing solution"); }
  const Eigen::MatrixXcd u1 = stable.topRows(n);
  const Eigen::MatrixXcd u2 = stable.bottomRows(n);
  const Eigen::MatrixXcd xc = u1.transpose().partialPivLu().solve(u2.transpose()).transpose();
  Matrix x = xc.real();
  x = 0.5 * (x + x.transpose()).eval();
  const Matrix res = a.transpose() * x + x * a - x * g * x + q;
  if (!all_finite(x) || res.norm() > 1e-6 * std::max(1.0, x.norm())) {
    throw NumericalError("solve_care: residual too large");
  }
  return x;
}

ControllerRealization lqr_output_seed(const SynthesisProblem & problem)
{
  const auto & mas = problem.mas;
  const int n_ag = mas.n_agents();
  const int nc = problem.n_c;
  std::vector<Matrix> d0;
  for (const auto & ag : mas.agents) {
    const Matrix x = solve_care(ag.a_bar, ag.b, Matrix::Identity(ag.n(), ag.n()), Matrix::Identity(ag.m(), ag.m()));
    const Matrix k = -ag.b.transpose() * x;
    d0.push_back(k * pinv(ag.c_bar));
  }
  double best_kappa = 1.0;
  double best_abscissa = std::numeric_limits<double>::infinity();
  for (int j = 0; j <= 10; ++j) {
    const double kappa = std::ldexp(1.0, -j);
    std::vector<Matrix> scaled;
    for (const auto & d : d0) { scaled.push_back(kappa * d); }
    const Matrix a_red = problem.reduced.a_r + problem.reduced.l_hat_n_b * block_diag(scaled) * problem.reduced.c_r;
    const double ab = spectral_abscissa(a_red);
    if (ab < best_abscissa) {
      best_abscissa = ab;
      best_kappa = kappa;
    }
  }
  ControllerRealization c;
  c.order = nc;
  for (int i = 0; i < n_ag; ++i) {
    c.a_c.push_back(-Matrix::Identity(nc, nc));
    c.b_c.push_back(Matrix::Zero(nc, mas.q()));
    c.c_c.push_back(Matrix::Zero(mas.m(), nc));
    c.d_c.push_back(best_kappa * d0[static_cast<std::size_t>(i)]);
  }
  return c;
}

}  // namespace consynth
