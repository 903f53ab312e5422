#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "consynth/io.hpp"
#include "consynth/manipulator.hpp"

namespace fs = std::filesystem;
using namespace consynth;

namespace {

enum Exit : int {
  kOk = 0,
  kSchema = 2,
  kInfeasible = 3,
  kSolverFailure = 4,
  kDiverged = 5,
  kVerifyFailed = 6,
};

struct SimOverrides
{
  std::optional<std::uint64_t> seed;
  bool no_disturbance = false;
  bool no_perturbation = false;
  bool identical_init = false;
  std::optional<double> horizon;
  std::optional<double> dt;
  std::optional<int> record_every;
};

void add_sim_flags(CLI::App * cmd, SimOverrides & o)
{
  cmd->add_option("--seed", o.seed, "simulation seed");
  cmd->add_flag("--no-disturbance", o.no_disturbance, "disable the Gaussian disturbance");
  cmd->add_flag("--no-perturbation", o.no_perturbation, "disable the controller perturbations");
  cmd->add_flag("--identical-init", o.identical_init, "start every agent from the same state");
  cmd->add_option("--horizon", o.horizon, "simulated time in seconds");
  cmd->add_option("--dt", o.dt, "integration step in seconds");
  cmd->add_option("--record-every", o.record_every, "keep every k-th step in the trajectory");
}

void apply_overrides(RunConfig & cfg, const SimOverrides & o)
{
  SimConfig & s = cfg.simulation;
  if (o.seed) { s.seed = *o.seed; }
  if (o.no_disturbance) { s.disturbance.kind = DisturbanceSpec::Kind::kNone; }
  if (o.no_perturbation) { cfg.perturbations = false; }
  if (o.identical_init) { s.identical_init = true; }
  if (o.horizon) { s.horizon = *o.horizon; }
  if (o.dt) { s.dt = *o.dt; }
  if (o.record_every) { s.record_every = *o.record_every; }
  try {
    s.validate();
  } catch (const std::invalid_argument & e) {
    throw ConfigError(e.what());
  }
}

/// Timestamps and runtimes go here so the other outputs stay reproducible.
void log_line(const fs::path & dir, const std::string & text)
{
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::ofstream out(dir / "run.log", std::ios::app);
  out << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ") << ' ' << text << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string dump(const Json & j) { return j.dump(2) + "\n"; }

/// Bundled example: three flexible-joint manipulators on a directed ring.
RunConfig manipulator_config()
{
  RunConfig cfg;
  cfg.agents.assign(manipulator::kAgents, manipulator::agent());
  cfg.nonlinearities.assign(manipulator::kAgents, manipulator::nonlinearity());
  cfg.adjacency = manipulator::adjacency();
  cfg.n_c = manipulator::kOrder;
  cfg.r_scale = 1.0;
  cfg.q_scale = 2.0;
  cfg.h_hat_scale = 1.0;
  cfg.bounds = manipulator::bounds();
  cfg.synthesis.delta_norm = DeltaNorm::kOutputGram;
  cfg.synthesis.controller_pole_radius = 50.0;
  cfg.synthesis.consistent_recovery = true;
  cfg.synthesis.solver = SolverOptions::from_env();
  return cfg;
}

int status_exit(const SynthesisResult & r)
{
  if (r.feasible()) { return kOk; }
  return r.status == SolveStatus::kInfeasible ? kInfeasible : kSolverFailure;
}

int run_synth(const RunConfig & cfg, RunMode mode, const fs::path & out)
{
  fs::create_directories(out);
  const auto t0 = std::chrono::steady_clock::now();
  const SynthesisProblem problem = build_problem(cfg, mode);
  for (const auto & w : problem.mas.warnings) { std::cerr << "warning: " << w << '\n'; }
  {
    std::ofstream lmi(out / "lmi.txt");
    export_problem(build_lmi(problem, synthesis_mode(mode)).problem, lmi);
  }
  const SynthesisResult r = synthesize(problem, synthesis_mode(mode));
  write_text_file((out / "synthesis.json").string(), dump(synthesis_to_json(r, mode, problem.n_c)));
  log_line(out, "synth mode=" + to_string(mode) + " status=" + to_string(r.status) +
                  " solver_runtime_s=" + format_double(r.solver_runtime) + " total_runtime_s=" + format_double(seconds_since(t0)));
  std::cout << "synth " << to_string(mode) << ": " << to_string(r.status) << " (" << r.message << ")\n";
  for (const auto & w : r.warnings) { std::cerr << "warning: " << w << '\n'; }
  if (!r.feasible()) {
    if (r.infeasibility_certificate) { std::cout << "  infeasibility certificate t* = " << *r.infeasibility_certificate << '\n'; }
    return status_exit(r);
  }
  std::cout << "  objective " << r.objective << ", rho^2 " << r.rho_squared << ", lmi residual " << r.lmi_residual
            << ", recovery residual " << r.controllers.max_residual() << '\n';
  return kOk;
}

SynthesisResult load_result(const fs::path & path, RunMode & mode)
{
  SynthesisResult r = synthesis_from_json(read_json_file(path.string()), mode);
  if (!r.feasible()) { throw ConfigError(path.string() + ": result holds no controller (status " + to_string(r.status) + ")"); }
  return r;
}

int run_simulate(const RunConfig & cfg, const fs::path & controllers, const fs::path & out)
{
  fs::create_directories(out);
  const auto t0 = std::chrono::steady_clock::now();
  RunMode mode{};
  const SynthesisResult r = load_result(controllers, mode);
  const SynthesisProblem problem = build_problem(cfg, mode);
  try {
    r.controllers.validate(problem.mas.n_agents(), problem.mas.m(), problem.mas.q());
  } catch (const std::invalid_argument & e) {
    throw ConfigError(controllers.string() + ": " + e.what());
  }
  const Trajectory traj = simulate(problem.mas, r.controllers, build_sim_config(cfg, problem));
  {
    std::ofstream csv(out / "trajectory.csv", std::ios::binary);
    write_trajectory_csv(csv, traj);
  }
  write_text_file((out / "trajectory_meta.json").string(), dump(trajectory_meta(traj)));
  log_line(out, "simulate seed=" + std::to_string(traj.seed) + " status=" + to_string(traj.status) +
                  " runtime_s=" + format_double(seconds_since(t0)));
  const auto e = consensus_error(traj);
  std::cout << "simulate: " << to_string(traj.status) << ", " << traj.size() << " samples, consensus error "
            << e.front() << " -> " << e.back() << '\n';
  if (traj.status != SimStatus::kCompleted) {
    std::cerr << "error: " << traj.message << '\n';
    return kDiverged;
  }
  return kOk;
}

int run_verify(const RunConfig & cfg, const fs::path & controllers, const std::optional<fs::path> & trajectory,
               const fs::path & out)
{
  fs::create_directories(out);
  RunMode mode{};
  const SynthesisResult r = load_result(controllers, mode);
  const SynthesisProblem problem = build_problem(cfg, mode);
  try {
    r.controllers.validate(problem.mas.n_agents(), problem.mas.m(), problem.mas.q());
  } catch (const std::invalid_argument & e) {
    throw ConfigError(controllers.string() + ": " + e.what());
  }
  const VerificationReport checks = verify_synthesis(problem, r, r.controllers);

  Json report;
  report["mode"] = to_string(mode);
  report["synthesis"] = Json{{"status", to_string(r.status)}, {"objective", r.objective}, {"rho_squared", r.rho_squared},
                             {"robustness_degrees", r.controllers.robustness_degrees},
                             {"recovery_consistent", r.recovery_consistent}};
  report["checks"] = verification_to_json(checks);
  double alpha = 0.0;
  for (const auto & ag : problem.mas.agents) { alpha = std::max(alpha, ag.alpha_bar); }
  double min_degree = std::numeric_limits<double>::infinity();
  for (double d : r.controllers.robustness_degrees) { min_degree = std::min(min_degree, d); }
  report["nonlinearity_coverage"] = Json{
    {"min_robustness_degree", min_degree},
    {"max_alpha_bar", alpha},
    {"covered", min_degree >= alpha},
    {"note", "the certificate covers nonlinear gains up to the robustness degree"}};

  bool hard_ok = true;
  for (const char * name : {"grand_pencil", "a_phi_hurwitz", "lyapunov_nominal"}) {
    const CheckItem * c = checks.find(name);
    if (c != nullptr && c->evaluated && !c->passed) { hard_ok = false; }
  }

  if (trajectory) {
    const fs::path meta_path = trajectory->parent_path() / "trajectory_meta.json";
    std::ifstream in(*trajectory);
    if (!in) { throw ConfigError("cannot open '" + trajectory->string() + "'"); }
    const Trajectory traj = read_trajectory_csv(in, read_json_file(meta_path.string()));
    StructuredPoint pt;
    pt.p_s = r.p_bar_s;
    pt.p_c = r.p_c;
    const Matrix p = certificate_p(pt, problem.mas.n_agents());
    const MetricsReport m = compute_metrics(traj, problem.reduced, &p, q_tilde(problem), r.rho_squared);
    report["simulation"] = trajectory_meta(traj);
    report["metrics"] = metrics_to_json(m);
    std::ofstream csv(out / "consensus.csv", std::ios::binary);
    write_consensus_csv(csv, m, traj);
    std::cout << "verify: consensus error ratio e(T)/e(0) = " << m.final_ratio << '\n';
  }
  report["hard_checks_passed"] = hard_ok;
  write_text_file((out / "report.json").string(), dump(report));

  for (const auto & c : checks.checks) {
    std::cout << "  " << std::left << std::setw(22) << c.name << ' '
              << (c.evaluated ? (c.passed ? "pass" : "FAIL") : "skipped") << "  " << c.value << '\n';
  }
  return hard_ok ? kOk : kVerifyFailed;
}

int run_demo(RunConfig cfg, const fs::path & out)
{
  int worst = kOk;
  for (RunMode mode : {RunMode::kTheorem1, RunMode::kCorollary1}) {
    const fs::path dir = out / to_string(mode);
    cfg.mode = mode;
    int rc = run_synth(cfg, mode, dir);
    if (rc == kOk) { rc = run_simulate(cfg, dir / "synthesis.json", dir); }
    if (rc == kOk || rc == kDiverged) {
      const int vr = run_verify(cfg, dir / "synthesis.json",
                                rc == kOk ? std::optional<fs::path>(dir / "trajectory.csv") : std::nullopt, dir);
      rc = rc == kOk ? vr : rc;
    }
    if (rc != kOk && worst == kOk) { worst = rc; }
  }
  std::cout << "published reference indices (robust design, not asserted):\n";
  for (const auto & ref : published_reference_indices()) {
    std::cout << "  agent " << ref.agent << ": ISE " << ref.indices.ise << "  IAE " << ref.indices.iae << "  ITSE "
              << ref.indices.itse << "  ITAE " << ref.indices.itae << '\n';
  }
  return worst;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Consensus controller synthesis, simulation and verification"};
  app.require_subcommand(1);

  std::string config_path, mode_name, out_dir, controllers_path, trajectory_path;
  SimOverrides sim;

  auto * synth = app.add_subcommand("synth", "solve the LMI problem and recover controllers");
  synth->add_option("--config", config_path, "run configuration (JSON)")->required();
  synth->add_option("--mode", mode_name, "theorem1, corollary1 or static");
  synth->add_option("--out", out_dir, "output directory");

  auto * simulate_cmd = app.add_subcommand("simulate", "simulate the closed loop");
  simulate_cmd->add_option("--config", config_path, "run configuration (JSON)")->required();
  simulate_cmd->add_option("--controllers", controllers_path, "synthesis.json (default: <out>/synthesis.json)");
  simulate_cmd->add_option("--out", out_dir, "output directory");
  add_sim_flags(simulate_cmd, sim);

  auto * verify = app.add_subcommand("verify", "check certificates and compute metrics");
  verify->add_option("--config", config_path, "run configuration (JSON)")->required();
  verify->add_option("--controllers", controllers_path, "synthesis.json (default: <out>/synthesis.json)");
  verify->add_option("--trajectory", trajectory_path, "trajectory.csv (default: <out>/trajectory.csv if present)");
  verify->add_option("--out", out_dir, "output directory");

  auto * demo = app.add_subcommand("demo", "manipulator example end to end");
  demo->add_option("--config", config_path, "override the bundled example configuration");
  demo->add_option("--out", out_dir, "output directory (default: out)");
  add_sim_flags(demo, sim);

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = config_path.empty() ? manipulator_config() : load_config(config_path);
    if (!mode_name.empty()) { cfg.mode = run_mode_from_string(mode_name); }
    const fs::path out = out_dir.empty() ? fs::path(cfg.output_dir) : fs::path(out_dir);
    const fs::path ctrl = controllers_path.empty() ? out / "synthesis.json" : fs::path(controllers_path);

    if (synth->parsed()) { return run_synth(cfg, cfg.mode, out); }
    if (simulate_cmd->parsed()) {
      apply_overrides(cfg, sim);
      return run_simulate(cfg, ctrl, out);
    }
    if (verify->parsed()) {
      std::optional<fs::path> traj;
      if (!trajectory_path.empty()) {
        traj = trajectory_path;
      } else if (fs::exists(out / "trajectory.csv")) {
        traj = out / "trajectory.csv";
      }
      return run_verify(cfg, ctrl, traj, out);
    }
    apply_overrides(cfg, sim);
    return run_demo(cfg, out);
  } catch (const ConfigError & e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSchema;
  } catch (const GraphError & e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInfeasible;
  } catch (const DimensionError & e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSchema;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolverFailure;
  }
}
