#include "consynth/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace consynth {

std::vector<double> consensus_error(const Trajectory & traj)
{
  std::vector<double> e(traj.size(), 0.0);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    double worst = 0.0;
    for (int i = 0; i < traj.n_agents; ++i) {
      for (int j = i + 1; j < traj.n_agents; ++j) {
        worst = std::max(worst, (traj.x[k].segment(i * traj.n, traj.n) - traj.x[k].segment(j * traj.n, traj.n)).norm());
      }
    }
    e[k] = worst;
  }
  return e;
}

SettlingInfo settling(const std::vector<double> & times, const std::vector<double> & error, double fraction)
{
  if (times.size() != error.size()) { throw DimensionError("settling: times and error differ in length"); }
  SettlingInfo s;
  if (error.empty()) { return s; }
  s.threshold = fraction * error.front();
  auto below = [&](double e) { return e < s.threshold || e == 0.0; };
  // last sample at or above the threshold
  std::optional<std::size_t> last_above;
  for (std::size_t k = 0; k < error.size(); ++k) {
    if (!below(error[k])) { last_above = k; }
  }
  if (!last_above) {
    s.settled_at = times.front();
  } else if (*last_above + 1 < error.size()) {
    s.settled_at = times[*last_above + 1];
  }
  bool entered = false;
  for (std::size_t k = 0; k < error.size(); ++k) {
    const bool in_band = below(error[k]);
    if (entered && !in_band && k > 0 && below(error[k - 1])) { ++s.recrossings; }
    entered = entered || in_band;
  }
  return s;
}

PerformanceIndices performance_indices(const std::vector<double> & times, const std::vector<double> & values,
                                       std::optional<std::pair<double, double>> window)
{
  if (times.empty()) { throw std::invalid_argument("performance_indices: empty series"); }
  if (times.size() != values.size()) { throw DimensionError("performance_indices: times and values differ in length"); }
  PerformanceIndices out;
  auto inside = [&](double t) { return !window || (t >= window->first && t <= window->second); };
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    const double t0 = times[k], t1 = times[k + 1];
    if (t1 < t0) { throw std::invalid_argument("performance_indices: times must be nondecreasing"); }
    if (!inside(t0) || !inside(t1)) { continue; }
    const double h = 0.5 * (t1 - t0);
    const double a0 = std::abs(values[k]), a1 = std::abs(values[k + 1]);
    out.ise += h * (a0 * a0 + a1 * a1);
    out.iae += h * (a0 + a1);
    out.itse += h * (t0 * a0 * a0 + t1 * a1 * a1);
    out.itae += h * (t0 * a0 + t1 * a1);
  }
  return out;
}

std::vector<PerformanceIndices> control_effort(const Trajectory & traj, std::optional<std::pair<double, double>> window)
{
  std::vector<PerformanceIndices> out;
  for (int i = 0; i < traj.n_agents; ++i) {
    std::vector<double> mag(traj.size());
    for (std::size_t k = 0; k < traj.size(); ++k) { mag[k] = traj.u[k].segment(i * traj.m, traj.m).norm(); }
    out.push_back(performance_indices(traj.times, mag, window));
  }
  return out;
}

Vector reduced_state(const Trajectory & traj, const ReducedSystem & reduced, std::size_t k)
{
  const auto nr = reduced.l_hat_n.rows();
  Vector xcl(nr + traj.x_c[k].size());
  xcl.head(nr) = reduced.l_hat_n * traj.x[k];
  xcl.tail(traj.x_c[k].size()) = traj.x_c[k];
  return xcl;
}

DissipationReport dissipation_check(const Trajectory & traj, const ReducedSystem & reduced, const Matrix & p_cert,
                                    const Matrix & q_tilde, double rho_squared, double rel_tol)
{
  const auto dim = reduced.l_hat_n.rows() + traj.n_agents * traj.n_c;
  if (p_cert.rows() != dim || p_cert.cols() != dim) { throw DimensionError("dissipation_check: certificate has the wrong size"); }
  if (q_tilde.rows() != dim || q_tilde.cols() != dim) { throw DimensionError("dissipation_check: weight has the wrong size"); }
  DissipationReport rep;
  rep.lyapunov.resize(traj.size());
  std::vector<double> quad(traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const Vector xcl = reduced_state(traj, reduced, k);
    rep.lyapunov[k] = xcl.dot(p_cert * xcl);
    quad[k] = xcl.dot(q_tilde * xcl);
  }
  for (std::size_t k = 1; k + 1 < traj.size(); ++k) {
    const double dv = (rep.lyapunov[k + 1] - rep.lyapunov[k - 1]) / (traj.times[k + 1] - traj.times[k - 1]);
    const Vector xir = reduced.l_hat_n * traj.xi[k];
    const double supply = rho_squared * xir.squaredNorm();
    const double value = dv + quad[k] - supply;
    const double scale = std::abs(dv) + quad[k] + supply;
    ++rep.samples;
    rep.max_value = rep.samples == 1 ? value : std::max(rep.max_value, value);
    if (scale > 0.0) { rep.max_relative = std::max(rep.max_relative, value / scale); }
    if (value > rel_tol * scale) { ++rep.violations; }
  }
  return rep;
}

HinfReport hinf_energy_ratio(const Trajectory & traj, const ReducedSystem & reduced, const Matrix & q_tilde)
{
  HinfReport rep;
  if (traj.size() == 0) { return rep; }
  rep.zero_initial_state = traj.x.front().cwiseAbs().maxCoeff() == 0.0 &&
                           (traj.x_c.front().size() == 0 || traj.x_c.front().cwiseAbs().maxCoeff() == 0.0);
  std::vector<double> quad(traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const Vector xcl = reduced_state(traj, reduced, k);
    quad[k] = xcl.dot(q_tilde * xcl);
  }
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    const double h = traj.times[k + 1] - traj.times[k];
    rep.output_energy += 0.5 * h * (quad[k] + quad[k + 1]);
    rep.disturbance_energy += h * (reduced.l_hat_n * traj.xi[k]).squaredNorm();
  }
  if (rep.disturbance_energy > 0.0) { rep.ratio = rep.output_energy / rep.disturbance_energy; }
  return rep;
}

double algebraic_lyapunov_check(const Matrix & a, const Matrix & p, const Matrix & q)
{
  if (a.rows() != p.rows() || p.rows() != q.rows()) { throw DimensionError("algebraic_lyapunov_check: size mismatch"); }
  const Matrix m = a.transpose() * p + p * a + q;
  return max_eig_sym(0.5 * (m + m.transpose()));
}

std::vector<ReferenceIndices> published_reference_indices()
{
  return {
    {1, {1.703, 1.306, 0.563, 0.721}},
    {2, {0.457, 0.807, 0.259, 0.644}},
    {3, {0.0028, 0.052, 8.92e-4, 0.029}},
  };
}

MetricsReport compute_metrics(const Trajectory & traj, const ReducedSystem & reduced, const Matrix * p_cert,
                              const Matrix & q_tilde, double rho_squared, double settle_fraction)
{
  MetricsReport r;
  r.times = traj.times;
  r.consensus_error = consensus_error(traj);
  if (!r.consensus_error.empty()) {
    r.initial_error = r.consensus_error.front();
    r.final_error = r.consensus_error.back();
    r.final_ratio = r.initial_error > 0.0 ? r.final_error / r.initial_error : 0.0;
  }
  r.settle_5 = settling(traj.times, r.consensus_error, settle_fraction);
  r.settle_1 = settling(traj.times, r.consensus_error, 0.01);
  r.indices = control_effort(traj);
  if (p_cert != nullptr) {
    r.dissipation = dissipation_check(traj, reduced, *p_cert, q_tilde, rho_squared);
    r.lyapunov = r.dissipation->lyapunov;
  }
  r.hinf = hinf_energy_ratio(traj, reduced, q_tilde);
  return r;
}

}  // namespace consynth
