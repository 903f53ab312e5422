#include "consynth/sim.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace consynth {

std::string to_string(Integrator i) { return i == Integrator::kRk4 ? "rk4" : "euler"; }

Integrator integrator_from_string(const std::string & s)
{
  if (s == "rk4") { return Integrator::kRk4; }
  if (s == "euler") { return Integrator::kEuler; }
  throw std::invalid_argument("unknown integrator '" + s + "' (rk4, euler)");
}

std::string to_string(SimStatus s)
{
  switch (s) {
    case SimStatus::kCompleted: return "completed";
    case SimStatus::kDiverged: return "diverged";
    case SimStatus::kNonFinite: return "non_finite";
  }
  return "completed";
}

SimStatus sim_status_from_string(const std::string & s)
{
  if (s == "completed") { return SimStatus::kCompleted; }
  if (s == "diverged") { return SimStatus::kDiverged; }
  if (s == "non_finite") { return SimStatus::kNonFinite; }
  throw std::invalid_argument("unknown simulation status '" + s + "'");
}

void DisturbanceSpec::validate(int n) const
{
  if (!(variance >= 0.0) || !std::isfinite(variance)) { throw std::invalid_argument("disturbance: variance must be >= 0"); }
  if (!channels.empty() && static_cast<int>(channels.size()) != n) {
    throw DimensionError("disturbance: channel mask needs " + std::to_string(n) + " entries");
  }
}

PerturbationSignals builtin_perturbations(int n_c, int q, int m, const PerturbationBounds & bounds)
{
  PerturbationSignals s;
  s.bounds = bounds;
  auto bank = [](int rows, int cols, double amp) {
    return [rows, cols, amp](int, double t) {
      Matrix out(rows, cols);
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) { out(r, c) = amp * std::sin((1.0 + r + 2.0 * c) * t + c); }
      }
      return out;
    };
  };
  if (n_c == 2 && q == 2 && m == 1) {
    const double da = bounds.delta_ac, db = bounds.delta_bc, dc = bounds.delta_cc, dd = bounds.delta_dc;
    s.delta_ac = [da](int, double t) {
      Matrix out(2, 2);
      out << std::sin(3 * t), std::sin(5 * t), std::sin(2 * t), std::cos(2 * t);
      return Matrix(da * out);
    };
    s.delta_bc = [db](int, double t) {
      Matrix out(2, 2);
      out << std::sin(2 * t), std::sin(2 * t), std::cos(2 * t), std::cos(2 * t);
      return Matrix(db * out);
    };
    s.delta_cc = [dc](int, double t) {
      Matrix out(1, 2);
      out << std::cos(t), std::sin(4 * t);
      return Matrix(dc * out);
    };
    s.delta_dc = [dd](int, double t) { return Matrix(Matrix::Constant(1, 2, dd * std::sin(t))); };
    return s;
  }
  s.delta_ac = bank(n_c, n_c, bounds.delta_ac);
  s.delta_bc = bank(n_c, q, bounds.delta_bc);
  s.delta_cc = bank(m, n_c, bounds.delta_cc);
  s.delta_dc = bank(m, q, bounds.delta_dc);
  return s;
}

Matrix sample_disturbance(const DisturbanceSpec & spec, int n_agents, int n, std::size_t steps, std::uint64_t seed)
{
  spec.validate(n);
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(steps), n_agents * n);
  if (spec.kind == DisturbanceSpec::Kind::kNone || spec.variance == 0.0) { return out; }
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32), 1u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, std::sqrt(spec.variance));
  for (Eigen::Index k = 0; k < out.rows(); ++k) {
    for (int i = 0; i < n_agents; ++i) {
      for (int j = 0; j < n; ++j) {
        const double v = normal(rng);
        if (spec.channels.empty() || spec.channels[static_cast<std::size_t>(j)] != 0) { out(k, i * n + j) = v; }
      }
    }
  }
  return out;
}

void SimConfig::validate() const
{
  if (!(dt > 0.0) || !std::isfinite(dt)) { throw std::invalid_argument("simulation: dt must be > 0"); }
  if (!(horizon >= dt) || !std::isfinite(horizon)) { throw std::invalid_argument("simulation: horizon must be >= dt"); }
  if (record_every < 1) { throw std::invalid_argument("simulation: record_every must be >= 1"); }
  if (!(init_half_width >= 0.0)) { throw std::invalid_argument("simulation: init_half_width must be >= 0"); }
  if (!(divergence_threshold > 0.0)) { throw std::invalid_argument("simulation: divergence threshold must be > 0"); }
}

std::size_t SimConfig::steps() const { return static_cast<std::size_t>(std::llround(horizon / dt)); }

namespace {

struct Perturbed
{
  std::vector<Matrix> a, b, c, d;
};

Matrix clip(const Matrix & m, double bound, long & events, bool count)
{
  const double nm = spectral_norm(m);
  if (nm <= bound) { return m; }
  if (count) { ++events; }
  return nm > 0.0 ? Matrix(m * (bound / nm)) : m;
}

class ClosedLoop
{
public:
  ClosedLoop(const MultiAgentSystem & mas, const ControllerRealization & ctrl, const SimConfig & cfg)
    : mas_(mas), ctrl_(ctrl), cfg_(cfg), n_ag_(mas.n_agents()), n_(mas.n()), nc_(ctrl.order), m_(mas.m()), q_(mas.q())
  {
    for (const auto & ag : mas.agents) {
      if (cfg.nonlinearity && ag.nonlinearity) { has_h_ = true; }
    }
  }

  Perturbed controller_at(double t, bool count, std::array<long, 4> & events) const
  {
    Perturbed p{ctrl_.a_c, ctrl_.b_c, ctrl_.c_c, ctrl_.d_c};
    if (!cfg_.perturbations) { return p; }
    const auto & s = *cfg_.perturbations;
    for (int i = 0; i < n_ag_; ++i) {
      const auto si = static_cast<std::size_t>(i);
      if (nc_ > 0) {
        if (s.delta_ac) { p.a[si] += clip(s.delta_ac(i, t), s.bounds.delta_ac, events[0], count); }
        if (s.delta_bc) { p.b[si] += clip(s.delta_bc(i, t), s.bounds.delta_bc, events[1], count); }
        if (s.delta_cc) { p.c[si] += clip(s.delta_cc(i, t), s.bounds.delta_cc, events[2], count); }
      }
      if (s.delta_dc) { p.d[si] += clip(s.delta_dc(i, t), s.bounds.delta_dc, events[3], count); }
    }
    return p;
  }

  /// Coupled outputs L_q y.
  Vector coupled_outputs(const Vector & y) const
  {
    const Matrix & l = mas_.graph.laplacian;
    Vector ly = Vector::Zero(n_ag_ * q_);
    for (int i = 0; i < n_ag_; ++i) {
      for (int j = 0; j < n_ag_; ++j) {
        if (l(i, j) != 0.0) { ly.segment(i * q_, q_) += l(i, j) * y.segment(j * q_, q_); }
      }
    }
    return ly;
  }

  Vector outputs(const Vector & x) const
  {
    Vector y(n_ag_ * q_);
    for (int i = 0; i < n_ag_; ++i) {
      y.segment(i * q_, q_) = mas_.agents[static_cast<std::size_t>(i)].c_bar * x.segment(i * n_, n_);
    }
    return y;
  }

  Vector inputs(const Vector & xc, const Vector & ly, const Perturbed & p) const
  {
    Vector u(n_ag_ * m_);
    for (int i = 0; i < n_ag_; ++i) {
      const auto si = static_cast<std::size_t>(i);
      Vector ui = p.d[si] * ly.segment(i * q_, q_);
      if (nc_ > 0) { ui += p.c[si] * xc.segment(i * nc_, nc_); }
      u.segment(i * m_, m_) = ui;
    }
    return u;
  }

  /// Derivative of the stacked state (x, x_c).
  Vector rhs(double t, const Vector & s, const Vector & xi, const Perturbed & p) const
  {
    const Vector x = s.head(n_ag_ * n_);
    const Vector xc = s.tail(n_ag_ * nc_);
    const Vector ly = coupled_outputs(outputs(x));
    const Vector u = inputs(xc, ly, p);
    Vector ds(s.size());
    for (int i = 0; i < n_ag_; ++i) {
      const auto si = static_cast<std::size_t>(i);
      const AgentModel & ag = mas_.agents[si];
      const Vector x_i = x.segment(i * n_, n_);
      Vector dx = ag.a_bar * x_i + ag.b * u.segment(i * m_, m_) + xi.segment(i * n_, n_);
      if (has_h_ && ag.nonlinearity) { dx += ag.nonlinearity(t, x_i); }
      ds.segment(i * n_, n_) = dx;
      if (nc_ > 0) {
        ds.segment(n_ag_ * n_ + i * nc_, nc_) =
          p.a[si] * xc.segment(i * nc_, nc_) + p.b[si] * ly.segment(i * q_, q_);
      }
    }
    return ds;
  }

private:
  const MultiAgentSystem & mas_;
  const ControllerRealization & ctrl_;
  const SimConfig & cfg_;
  int n_ag_, n_, nc_, m_, q_;
  bool has_h_ = false;
};

}  // namespace

Trajectory simulate(const MultiAgentSystem & mas, const ControllerRealization & ctrl, const SimConfig & cfg)
{
  cfg.validate();
  const int n_ag = mas.n_agents();
  const int n = mas.n();
  ctrl.validate(n_ag, mas.m(), mas.q());
  const int nc = ctrl.order;
  if (mas.graph.laplacian.rows() != n_ag) { throw DimensionError("simulate: graph does not match agent count"); }
  cfg.disturbance.validate(n);

  ClosedLoop loop(mas, ctrl, cfg);
  Trajectory tr;
  tr.n_agents = n_ag;
  tr.n = n;
  tr.n_c = nc;
  tr.m = mas.m();
  tr.q = mas.q();
  tr.seed = cfg.seed;
  tr.dt = cfg.dt;
  tr.horizon = cfg.horizon;
  tr.integrator = cfg.integrator;
  tr.disturbance = cfg.disturbance.kind != DisturbanceSpec::Kind::kNone && cfg.disturbance.variance > 0.0;
  tr.perturbations = cfg.perturbations.has_value();
  tr.record_every = cfg.record_every;

  // initial state
  Vector s = Vector::Zero(n_ag * (n + nc));
  if (!cfg.initial_states.empty()) {
    if (static_cast<int>(cfg.initial_states.size()) != n_ag) { throw DimensionError("simulate: need one initial state per agent"); }
    for (int i = 0; i < n_ag; ++i) {
      const Vector & v = cfg.initial_states[static_cast<std::size_t>(i)];
      if (v.size() != n) { throw DimensionError("simulate: initial state has the wrong length"); }
      s.segment(i * n, n) = cfg.identical_init ? cfg.initial_states.front() : v;
    }
  } else {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed & 0xffffffffu), static_cast<std::uint32_t>(cfg.seed >> 32), 0u};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> uni(-cfg.init_half_width, cfg.init_half_width);
    for (int i = 0; i < n_ag; ++i) {
      for (int j = 0; j < n; ++j) { s(i * n + j) = uni(rng); }
    }
    if (cfg.identical_init) {
      for (int i = 1; i < n_ag; ++i) { s.segment(i * n, n) = s.head(n); }
    }
  }
  if (!cfg.initial_controller_states.empty()) {
    if (static_cast<int>(cfg.initial_controller_states.size()) != n_ag) {
      throw DimensionError("simulate: need one initial controller state per agent");
    }
    for (int i = 0; i < n_ag; ++i) {
      const Vector & v = cfg.initial_controller_states[static_cast<std::size_t>(i)];
      if (v.size() != nc) { throw DimensionError("simulate: initial controller state has the wrong length"); }
      s.segment(n_ag * n + i * nc, nc) = v;
    }
  }

  const std::size_t steps = cfg.steps();
  const Matrix noise = sample_disturbance(cfg.disturbance, n_ag, n, steps + 1, cfg.seed);
  const double dt = cfg.dt;
  std::array<long, 4> scratch{0, 0, 0, 0};

  auto record = [&](std::size_t k, const Vector & state, const Vector & xi, const Perturbed & p) {
    const double t = static_cast<double>(k) * dt;
    const Vector x = state.head(n_ag * n);
    const Vector xc = state.tail(n_ag * nc);
    const Vector y = loop.outputs(x);
    tr.times.push_back(t);
    tr.x.push_back(x);
    tr.x_c.push_back(xc);
    tr.y.push_back(y);
    tr.u.push_back(loop.inputs(xc, loop.coupled_outputs(y), p));
    tr.xi.push_back(xi);
  };

  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Vector xi = noise.row(static_cast<Eigen::Index>(k)).transpose();
    const Perturbed p0 = loop.controller_at(t, true, tr.clip_events);
    const bool last = k == steps;
    if (last || k % static_cast<std::size_t>(cfg.record_every) == 0) { record(k, s, xi, p0); }
    if (last) { break; }

    Vector next;
    if (cfg.integrator == Integrator::kEuler) {
      next = s + dt * loop.rhs(t, s, xi, p0);
    } else {
      const Perturbed pm = loop.controller_at(t + 0.5 * dt, false, scratch);
      const Perturbed p1 = loop.controller_at(t + dt, false, scratch);
      const Vector k1 = loop.rhs(t, s, xi, p0);
      const Vector k2 = loop.rhs(t + 0.5 * dt, s + 0.5 * dt * k1, xi, pm);
      const Vector k3 = loop.rhs(t + 0.5 * dt, s + 0.5 * dt * k2, xi, pm);
      const Vector k4 = loop.rhs(t + dt, s + dt * k3, xi, p1);
      next = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    const bool finite = next.allFinite();
    const bool diverged = finite && next.cwiseAbs().maxCoeff() > cfg.divergence_threshold;
    if (!finite || diverged) {
      const double tn = static_cast<double>(k + 1) * dt;
      if (k % static_cast<std::size_t>(cfg.record_every) != 0) { record(k, s, xi, p0); }
      if (finite) {
        record(k + 1, next, noise.row(static_cast<Eigen::Index>(k + 1)).transpose(),
               loop.controller_at(tn, false, scratch));
      }
      tr.status = finite ? SimStatus::kDiverged : SimStatus::kNonFinite;
      tr.message = (finite ? "state magnitude exceeded " + std::to_string(cfg.divergence_threshold)
                           : std::string("non-finite state")) +
                   " at t = " + std::to_string(tn);
      return tr;
    }
    s = next;
  }
  tr.message = "completed " + std::to_string(steps) + " steps";
  return tr;
}

}  // namespace consynth
