#include "consynth/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace consynth {

std::string to_string(RunMode m)
{
  switch (m) {
    case RunMode::kTheorem1: return "theorem1";
    case RunMode::kCorollary1: return "corollary1";
    case RunMode::kStatic: return "static";
  }
  return "theorem1";
}

RunMode run_mode_from_string(const std::string & s)
{
  if (s == "theorem1") { return RunMode::kTheorem1; }
  if (s == "corollary1") { return RunMode::kCorollary1; }
  if (s == "static") { return RunMode::kStatic; }
  throw ConfigError("unknown mode '" + s + "' (theorem1, corollary1, static)");
}

SynthesisMode synthesis_mode(RunMode m)
{
  return m == RunMode::kCorollary1 ? SynthesisMode::kCorollary1 : SynthesisMode::kTheorem1;
}

std::string format_double(double v)
{
  if (std::isnan(v)) { return "nan"; }
  if (std::isinf(v)) { return v > 0 ? "inf" : "-inf"; }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

void check_keys(const Json & j, std::initializer_list<const char *> allowed, const std::string & where)
{
  if (!j.is_object()) { throw ConfigError(where + ": expected an object"); }
  for (const auto & item : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char * k) { return item.key() == k; });
    if (!known) { throw ConfigError(where + ": unknown key '" + item.key() + "'"); }
  }
}

const Json & require(const Json & j, const char * key, const std::string & where)
{
  if (!j.contains(key)) { throw ConfigError(where + ": missing required key '" + key + "'"); }
  return j.at(key);
}

double number(const Json & j, const std::string & what)
{
  if (!j.is_number()) { throw ConfigError(what + ": expected a number"); }
  const double v = j.get<double>();
  if (!std::isfinite(v)) { throw ConfigError(what + ": must be finite"); }
  return v;
}

double number_or(const Json & j, const char * key, double fallback, const std::string & where)
{
  return j.contains(key) ? number(j.at(key), where + "." + key) : fallback;
}

int integer(const Json & j, const std::string & what)
{
  if (!j.is_number_integer()) { throw ConfigError(what + ": expected an integer"); }
  return j.get<int>();
}

bool boolean_or(const Json & j, const char * key, bool fallback, const std::string & where)
{
  if (!j.contains(key)) { return fallback; }
  if (!j.at(key).is_boolean()) { throw ConfigError(where + "." + key + ": expected true or false"); }
  return j.at(key).get<bool>();
}

std::string string_or(const Json & j, const char * key, const std::string & fallback, const std::string & where)
{
  if (!j.contains(key)) { return fallback; }
  if (!j.at(key).is_string()) { throw ConfigError(where + "." + key + ": expected a string"); }
  return j.at(key).get<std::string>();
}

Vector vector_from_json(const Json & j, const std::string & what)
{
  if (!j.is_array()) { throw ConfigError(what + ": expected an array of numbers"); }
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) { v(static_cast<Eigen::Index>(i)) = number(j[i], what); }
  return v;
}

std::vector<Matrix> matrix_list(const Json & j, const std::string & what)
{
  if (!j.is_array()) { throw ConfigError(what + ": expected a list of matrices"); }
  std::vector<Matrix> out;
  for (std::size_t i = 0; i < j.size(); ++i) { out.push_back(matrix_from_json(j[i], what + "[" + std::to_string(i) + "]")); }
  return out;
}

Json vector_to_json(const Vector & v)
{
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) { a.push_back(v(i)); }
  return a;
}

/// JSON numbers cannot hold inf or nan.
Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

AgentModel parse_agent(const Json & j, const std::string & where, NonlinearitySpec & nl)
{
  check_keys(j, {"a", "b", "c", "h_bar", "alpha_bar", "nonlinearity"}, where);
  AgentModel ag;
  ag.a_bar = matrix_from_json(require(j, "a", where), where + ".a");
  ag.b = matrix_from_json(require(j, "b", where), where + ".b");
  ag.c_bar = matrix_from_json(require(j, "c", where), where + ".c");
  ag.h_bar = j.contains("h_bar") ? matrix_from_json(j.at("h_bar"), where + ".h_bar") : Matrix::Zero(1, ag.a_bar.cols());
  ag.alpha_bar = number_or(j, "alpha_bar", 1.0, where);
  nl = NonlinearitySpec{};
  if (j.contains("nonlinearity")) {
    const Json & h = j.at("nonlinearity");
    const std::string hw = where + ".nonlinearity";
    check_keys(h, {"kind", "source", "target", "gain"}, hw);
    const std::string kind = string_or(h, "kind", "none", hw);
    if (kind == "sine") {
      nl.kind = NonlinearitySpec::Kind::kSine;
      nl.source = integer(require(h, "source", hw), hw + ".source");
      nl.target = integer(require(h, "target", hw), hw + ".target");
      nl.gain = number(require(h, "gain", hw), hw + ".gain");
    } else if (kind != "none") {
      throw ConfigError(hw + ".kind: unknown nonlinearity '" + kind + "' (none, sine)");
    }
  }
  try {
    ag.nonlinearity = make_nonlinearity(nl, static_cast<int>(ag.a_bar.rows()));
    ag.validate();
  } catch (const std::invalid_argument & e) {
    throw ConfigError(where + ": " + e.what());
  }
  return ag;
}

Json nonlinearity_to_json(const NonlinearitySpec & s)
{
  Json j;
  if (s.kind == NonlinearitySpec::Kind::kNone) {
    j["kind"] = "none";
    return j;
  }
  j["kind"] = "sine";
  j["source"] = s.source;
  j["target"] = s.target;
  j["gain"] = s.gain;
  return j;
}

Json indices_to_json(const PerformanceIndices & p)
{
  return Json{{"ise", p.ise}, {"iae", p.iae}, {"itse", p.itse}, {"itae", p.itae}};
}

Json settling_to_json(const SettlingInfo & s)
{
  Json j;
  j["threshold"] = s.threshold;
  j["settled_at"] = s.settled_at ? Json(*s.settled_at) : Json(nullptr);
  j["recrossings"] = s.recrossings;
  return j;
}

}  // namespace

Json matrix_to_json(const Matrix & m)
{
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) { row.push_back(m(i, j)); }
    rows.push_back(row);
  }
  return rows;
}

Matrix matrix_from_json(const Json & j, const std::string & what)
{
  if (j.is_number()) { return Matrix::Constant(1, 1, number(j, what)); }
  if (!j.is_array() || j.empty()) { throw ConfigError(what + ": expected a nonempty array of rows"); }
  const std::size_t rows = j.size();
  if (!j[0].is_array()) { throw ConfigError(what + ": rows must be arrays"); }
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) { throw ConfigError(what + ": ragged rows"); }
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = number(j[r][c], what);
    }
  }
  return m;
}

RunConfig parse_config(const Json & j)
{
  const std::string root = "config";
  check_keys(j, {"system", "controller_order", "mode", "weights", "h_hat", "perturbation_bounds", "synthesis", "solver",
                 "simulation", "output_dir"},
             root);
  RunConfig cfg;

  const Json & sys = require(j, "system", root);
  check_keys(sys, {"agents", "agent", "adjacency"}, "system");
  cfg.adjacency = matrix_from_json(require(sys, "adjacency", "system"), "system.adjacency");
  const int n_ag = static_cast<int>(cfg.adjacency.rows());
  if (sys.contains("agents") == sys.contains("agent")) {
    throw ConfigError("system: give exactly one of 'agents' (list) or 'agent' (shared by all)");
  }
  if (sys.contains("agent")) {
    NonlinearitySpec nl;
    const AgentModel ag = parse_agent(sys.at("agent"), "system.agent", nl);
    cfg.agents.assign(static_cast<std::size_t>(n_ag), ag);
    cfg.nonlinearities.assign(static_cast<std::size_t>(n_ag), nl);
  } else {
    const Json & list = sys.at("agents");
    if (!list.is_array()) { throw ConfigError("system.agents: expected a list"); }
    for (std::size_t i = 0; i < list.size(); ++i) {
      NonlinearitySpec nl;
      cfg.agents.push_back(parse_agent(list[i], "system.agents[" + std::to_string(i) + "]", nl));
      cfg.nonlinearities.push_back(nl);
    }
    if (static_cast<int>(cfg.agents.size()) != n_ag) {
      throw ConfigError("system: agent count does not match the adjacency size");
    }
  }

  cfg.n_c = integer(require(j, "controller_order", root), "controller_order");
  if (cfg.n_c < 0) { throw ConfigError("controller_order: must be >= 0"); }
  cfg.mode = run_mode_from_string(string_or(j, "mode", "theorem1", root));

  if (j.contains("weights")) {
    const Json & w = j.at("weights");
    check_keys(w, {"r", "q"}, "weights");
    if (w.contains("r")) {
      if (w.at("r").is_number()) { cfg.r_scale = number(w.at("r"), "weights.r"); }
      else { cfg.r_blocks = matrix_list(w.at("r"), "weights.r"); }
    }
    if (w.contains("q")) {
      if (w.at("q").is_number()) { cfg.q_scale = number(w.at("q"), "weights.q"); }
      else { cfg.q_blocks = matrix_list(w.at("q"), "weights.q"); }
    }
  }
  if (j.contains("h_hat")) {
    if (j.at("h_hat").is_number()) { cfg.h_hat_scale = number(j.at("h_hat"), "h_hat"); }
    else { cfg.h_hat_blocks = matrix_list(j.at("h_hat"), "h_hat"); }
  }
  if (j.contains("perturbation_bounds")) {
    const Json & b = j.at("perturbation_bounds");
    check_keys(b, {"a_c", "b_c", "c_c", "d_c"}, "perturbation_bounds");
    cfg.bounds.delta_ac = number_or(b, "a_c", 0.0, "perturbation_bounds");
    cfg.bounds.delta_bc = number_or(b, "b_c", 0.0, "perturbation_bounds");
    cfg.bounds.delta_cc = number_or(b, "c_c", 0.0, "perturbation_bounds");
    cfg.bounds.delta_dc = number_or(b, "d_c", 0.0, "perturbation_bounds");
    if (cfg.bounds.delta_ac < 0 || cfg.bounds.delta_bc < 0 || cfg.bounds.delta_cc < 0 || cfg.bounds.delta_dc < 0) {
      throw ConfigError("perturbation_bounds: must be >= 0");
    }
  }

  SynthesisOptions & so = cfg.synthesis;
  so.solver = SolverOptions::from_env();
  if (j.contains("synthesis")) {
    const Json & s = j.at("synthesis");
    const std::string w = "synthesis";
    check_keys(s, {"delta_norm", "controller_pole_radius", "consistent_recovery", "margin_eps", "box",
                   "recovery_threshold", "refinement"},
               w);
    try {
      so.delta_norm = delta_norm_from_string(string_or(s, "delta_norm", "spectral", w));
    } catch (const std::invalid_argument & e) {
      throw ConfigError(std::string("synthesis.delta_norm: ") + e.what());
    }
    so.controller_pole_radius = number_or(s, "controller_pole_radius", 0.0, w);
    so.consistent_recovery = boolean_or(s, "consistent_recovery", false, w);
    so.margin_eps = number_or(s, "margin_eps", so.margin_eps, w);
    so.box = number_or(s, "box", so.box, w);
    so.recovery_threshold = number_or(s, "recovery_threshold", so.recovery_threshold, w);
    if (so.controller_pole_radius < 0 || !(so.margin_eps > 0) || !(so.box > 0) || !(so.recovery_threshold > 0)) {
      throw ConfigError("synthesis: radius must be >= 0; margin_eps, box and recovery_threshold > 0");
    }
    if (s.contains("refinement")) {
      const Json & r = s.at("refinement");
      check_keys(r, {"max_iterations", "rel_tol", "max_stalled"}, "synthesis.refinement");
      if (r.contains("max_iterations")) { so.refinement.max_iterations = integer(r.at("max_iterations"), "synthesis.refinement.max_iterations"); }
      if (r.contains("max_stalled")) { so.refinement.max_stalled = integer(r.at("max_stalled"), "synthesis.refinement.max_stalled"); }
      so.refinement.rel_tol = number_or(r, "rel_tol", so.refinement.rel_tol, "synthesis.refinement");
    }
  }
  if (j.contains("solver")) {
    const Json & s = j.at("solver");
    check_keys(s, {"max_iterations", "tol", "post_check_tol", "verbose"}, "solver");
    if (s.contains("max_iterations")) { so.solver.max_iterations = integer(s.at("max_iterations"), "solver.max_iterations"); }
    so.solver.tol = number_or(s, "tol", so.solver.tol, "solver");
    so.solver.post_check_tol = number_or(s, "post_check_tol", so.solver.post_check_tol, "solver");
    so.solver.verbose = boolean_or(s, "verbose", so.solver.verbose, "solver");
    if (so.solver.max_iterations < 1 || !(so.solver.tol > 0) || !(so.solver.post_check_tol >= 0)) {
      throw ConfigError("solver: max_iterations >= 1, tol > 0, post_check_tol >= 0");
    }
  }

  SimConfig & sc = cfg.simulation;
  if (j.contains("simulation")) {
    const Json & s = j.at("simulation");
    const std::string w = "simulation";
    check_keys(s, {"horizon", "dt", "integrator", "seed", "init_half_width", "identical_init", "record_every",
                   "nonlinearity", "disturbance", "perturbations", "initial_states", "initial_controller_states"},
               w);
    sc.horizon = number_or(s, "horizon", sc.horizon, w);
    sc.dt = number_or(s, "dt", sc.dt, w);
    try {
      sc.integrator = integrator_from_string(string_or(s, "integrator", "rk4", w));
    } catch (const std::invalid_argument & e) {
      throw ConfigError(std::string("simulation.integrator: ") + e.what());
    }
    if (s.contains("seed")) {
      const Json & sd = s.at("seed");
      if (!sd.is_number_integer() || (!sd.is_number_unsigned() && sd.get<std::int64_t>() < 0)) {
        throw ConfigError("simulation.seed: expected a nonnegative integer");
      }
      sc.seed = s.at("seed").get<std::uint64_t>();
    }
    sc.init_half_width = number_or(s, "init_half_width", sc.init_half_width, w);
    sc.identical_init = boolean_or(s, "identical_init", false, w);
    if (s.contains("record_every")) { sc.record_every = integer(s.at("record_every"), "simulation.record_every"); }
    sc.nonlinearity = boolean_or(s, "nonlinearity", true, w);
    cfg.perturbations = boolean_or(s, "perturbations", true, w);
    if (s.contains("disturbance")) {
      const Json & d = s.at("disturbance");
      check_keys(d, {"kind", "variance", "channels"}, "simulation.disturbance");
      const std::string kind = string_or(d, "kind", "gaussian", "simulation.disturbance");
      if (kind == "gaussian") { sc.disturbance.kind = DisturbanceSpec::Kind::kGaussian; }
      else if (kind == "none") { sc.disturbance.kind = DisturbanceSpec::Kind::kNone; }
      else { throw ConfigError("simulation.disturbance.kind: unknown kind '" + kind + "' (gaussian, none)"); }
      sc.disturbance.variance = number_or(d, "variance", 1.0, "simulation.disturbance");
      if (d.contains("channels")) {
        const Vector mask = vector_from_json(d.at("channels"), "simulation.disturbance.channels");
        sc.disturbance.channels.clear();
        for (Eigen::Index i = 0; i < mask.size(); ++i) { sc.disturbance.channels.push_back(mask(i) != 0.0 ? 1 : 0); }
      }
    }
    if (s.contains("initial_states")) {
      for (const auto & v : s.at("initial_states")) { sc.initial_states.push_back(vector_from_json(v, "simulation.initial_states")); }
    }
    if (s.contains("initial_controller_states")) {
      for (const auto & v : s.at("initial_controller_states")) {
        sc.initial_controller_states.push_back(vector_from_json(v, "simulation.initial_controller_states"));
      }
    }
    try {
      sc.validate();
    } catch (const std::invalid_argument & e) {
      throw ConfigError(e.what());
    }
  }
  cfg.output_dir = string_or(j, "output_dir", cfg.output_dir, root);
  return cfg;
}

Json read_json_file(const std::string & path)
{
  std::ifstream in(path);
  if (!in) { throw ConfigError("cannot open '" + path + "'"); }
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error & e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_text_file(const std::string & path, const std::string & text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) { throw std::runtime_error("cannot write '" + path + "'"); }
  out << text;
}

RunConfig load_config(const std::string & path) { return parse_config(read_json_file(path)); }

Json config_to_json(const RunConfig & cfg)
{
  Json j;
  Json agents = Json::array();
  for (std::size_t i = 0; i < cfg.agents.size(); ++i) {
    const AgentModel & a = cfg.agents[i];
    agents.push_back(Json{{"a", matrix_to_json(a.a_bar)},
                          {"b", matrix_to_json(a.b)},
                          {"c", matrix_to_json(a.c_bar)},
                          {"h_bar", matrix_to_json(a.h_bar)},
                          {"alpha_bar", a.alpha_bar},
                          {"nonlinearity", nonlinearity_to_json(cfg.nonlinearities[i])}});
  }
  j["system"] = Json{{"agents", agents}, {"adjacency", matrix_to_json(cfg.adjacency)}};
  j["controller_order"] = cfg.n_c;
  j["mode"] = to_string(cfg.mode);
  Json w;
  if (cfg.r_blocks.empty()) { w["r"] = cfg.r_scale; }
  else { w["r"] = Json::array(); for (const auto & m : cfg.r_blocks) { w["r"].push_back(matrix_to_json(m)); } }
  if (cfg.q_blocks.empty()) { w["q"] = cfg.q_scale; }
  else { w["q"] = Json::array(); for (const auto & m : cfg.q_blocks) { w["q"].push_back(matrix_to_json(m)); } }
  j["weights"] = w;
  if (cfg.h_hat_blocks.empty()) { j["h_hat"] = cfg.h_hat_scale; }
  else { j["h_hat"] = Json::array(); for (const auto & m : cfg.h_hat_blocks) { j["h_hat"].push_back(matrix_to_json(m)); } }
  j["perturbation_bounds"] = Json{{"a_c", cfg.bounds.delta_ac}, {"b_c", cfg.bounds.delta_bc},
                                  {"c_c", cfg.bounds.delta_cc}, {"d_c", cfg.bounds.delta_dc}};
  const SynthesisOptions & so = cfg.synthesis;
  j["synthesis"] = Json{{"delta_norm", to_string(so.delta_norm)},
                        {"controller_pole_radius", so.controller_pole_radius},
                        {"consistent_recovery", so.consistent_recovery},
                        {"margin_eps", so.margin_eps},
                        {"box", so.box},
                        {"recovery_threshold", so.recovery_threshold},
                        {"refinement", Json{{"max_iterations", so.refinement.max_iterations},
                                            {"rel_tol", so.refinement.rel_tol},
                                            {"max_stalled", so.refinement.max_stalled}}}};
  j["solver"] = Json{{"max_iterations", so.solver.max_iterations}, {"tol", so.solver.tol},
                     {"post_check_tol", so.solver.post_check_tol}};
  const SimConfig & sc = cfg.simulation;
  Json sim{{"horizon", sc.horizon},
           {"dt", sc.dt},
           {"integrator", to_string(sc.integrator)},
           {"seed", sc.seed},
           {"init_half_width", sc.init_half_width},
           {"identical_init", sc.identical_init},
           {"record_every", sc.record_every},
           {"nonlinearity", sc.nonlinearity},
           {"perturbations", cfg.perturbations}};
  Json dist{{"kind", sc.disturbance.kind == DisturbanceSpec::Kind::kNone ? "none" : "gaussian"},
            {"variance", sc.disturbance.variance}};
  if (!sc.disturbance.channels.empty()) { dist["channels"] = sc.disturbance.channels; }
  sim["disturbance"] = dist;
  if (!sc.initial_states.empty()) {
    sim["initial_states"] = Json::array();
    for (const auto & v : sc.initial_states) { sim["initial_states"].push_back(vector_to_json(v)); }
  }
  if (!sc.initial_controller_states.empty()) {
    sim["initial_controller_states"] = Json::array();
    for (const auto & v : sc.initial_controller_states) { sim["initial_controller_states"].push_back(vector_to_json(v)); }
  }
  j["simulation"] = sim;
  j["output_dir"] = cfg.output_dir;
  return j;
}

MultiAgentSystem build_system(const RunConfig & cfg)
{
  try {
    return assemble_global(cfg.agents, NetworkGraph::from_adjacency(cfg.adjacency));
  } catch (const GraphError &) {
    throw;
  } catch (const std::invalid_argument & e) {
    throw ConfigError(std::string("system: ") + e.what());
  }
}

SynthesisProblem build_problem(const RunConfig & cfg, RunMode mode)
{
  SynthesisProblem p;
  p.mas = build_system(cfg);
  p.reduced = build_reduced(p.mas);
  const int n_ag = p.mas.n_agents();
  const int n = p.mas.n();
  p.n_c = mode == RunMode::kStatic ? 0 : cfg.n_c;
  p.weights = DesignWeights::scaled_identity(cfg.r_scale, cfg.q_scale, n_ag, n, p.n_c);
  if (!cfg.r_blocks.empty()) { p.weights.r = cfg.r_blocks; }
  if (!cfg.q_blocks.empty() && mode != RunMode::kStatic) { p.weights.q = cfg.q_blocks; }
  p.bounds = cfg.bounds;
  if (cfg.h_hat_blocks.empty()) {
    p.h_hat = cfg.h_hat_scale * Matrix::Identity((n_ag - 1) * n, (n_ag - 1) * n);
    p.h_hat_blocks.assign(static_cast<std::size_t>(n_ag - 1), n);
  } else {
    if (static_cast<int>(cfg.h_hat_blocks.size()) != n_ag - 1) { throw ConfigError("h_hat: need N-1 blocks"); }
    for (const auto & b : cfg.h_hat_blocks) {
      if (b.cols() != n) { throw ConfigError("h_hat: every block needs n columns"); }
      p.h_hat_blocks.push_back(static_cast<int>(b.rows()));
    }
    std::vector<Matrix> blocks = cfg.h_hat_blocks;
    p.h_hat = block_diag(blocks);
  }
  p.options = cfg.synthesis;
  try {
    p.validate();
  } catch (const std::invalid_argument & e) {
    throw ConfigError(e.what());
  }
  return p;
}

SimConfig build_sim_config(const RunConfig & cfg, const SynthesisProblem & problem)
{
  SimConfig sc = cfg.simulation;
  sc.perturbations.reset();
  if (cfg.perturbations) {
    sc.perturbations = builtin_perturbations(problem.n_c, problem.mas.q(), problem.mas.m(), problem.bounds);
  }
  return sc;
}

Json synthesis_to_json(const SynthesisResult & r, RunMode mode, int n_c)
{
  Json j;
  j["format"] = "consynth-synthesis 1";
  j["mode"] = to_string(mode);
  j["controller_order"] = n_c;
  j["status"] = to_string(r.status);
  j["message"] = r.message;
  j["feasible"] = r.feasible();
  if (r.infeasibility_certificate) { j["infeasibility_certificate"] = finite_or_null(*r.infeasibility_certificate); }
  if (!r.feasible()) {
    j["warnings"] = r.warnings;
    return j;
  }
  j["objective"] = r.objective;
  j["rho"] = r.rho;
  j["rho_squared"] = r.rho_squared;
  j["gamma_hat"] = r.gamma_hat;
  Json tau;
  for (std::size_t i = 0; i < r.tau.size(); ++i) { tau["tau" + std::to_string(i + 1)] = r.tau[i]; }
  j["tau"] = tau;
  j["robustness_degrees"] = r.controllers.robustness_degrees;
  j["lmi_residual"] = r.lmi_residual;
  j["max_violation"] = r.max_violation;
  j["recovery_consistent"] = r.recovery_consistent;
  j["recovery_residual_c"] = r.controllers.residual_c;
  j["recovery_residual_d"] = r.controllers.residual_d;
  j["solver_iterations"] = r.solver_iterations;
  Json agents = Json::array();
  for (int i = 0; i < r.controllers.n_agents(); ++i) {
    const auto si = static_cast<std::size_t>(i);
    agents.push_back(Json{{"a_c", matrix_to_json(r.controllers.a_c[si])},
                          {"b_c", matrix_to_json(r.controllers.b_c[si])},
                          {"c_c", matrix_to_json(r.controllers.c_c[si])},
                          {"d_c", matrix_to_json(r.controllers.d_c[si])}});
  }
  j["controllers"] = agents;
  Json pc = Json::array();
  for (const auto & m : r.p_c) { pc.push_back(matrix_to_json(m)); }
  j["certificate"] = Json{{"p_bar_s", matrix_to_json(r.p_bar_s)}, {"p_c", pc}};
  const RefinementReport & rf = r.refinement;
  j["refinement"] = Json{{"attempted", rf.attempted},
                         {"succeeded", rf.succeeded},
                         {"iterations", rf.iterations},
                         {"slack_history", rf.slack_history},
                         {"objective_history", rf.objective_history},
                         {"message", rf.message}};
  j["warnings"] = r.warnings;
  j["decision_vector"] = vector_to_json(r.x);
  return j;
}

SynthesisResult synthesis_from_json(const Json & j, RunMode & mode)
{
  const std::string w = "synthesis result";
  if (!j.is_object() || string_or(j, "format", "", w) != "consynth-synthesis 1") {
    throw ConfigError(w + ": not a consynth synthesis file");
  }
  mode = run_mode_from_string(string_or(j, "mode", "", w));
  SynthesisResult r;
  r.mode = synthesis_mode(mode);
  const std::string status = string_or(j, "status", "", w);
  if (status == "optimal") { r.status = SolveStatus::kOptimal; }
  else if (status == "feasible") { r.status = SolveStatus::kFeasible; }
  else if (status == "infeasible") { r.status = SolveStatus::kInfeasible; }
  else { r.status = SolveStatus::kNumericalFailure; }
  r.message = string_or(j, "message", "", w);
  if (!r.feasible()) { return r; }
  const int n_c = integer(require(j, "controller_order", w), w + ".controller_order");
  r.objective = number(require(j, "objective", w), w + ".objective");
  r.rho = number(require(j, "rho", w), w + ".rho");
  r.rho_squared = number(require(j, "rho_squared", w), w + ".rho_squared");
  r.gamma_hat = require(j, "gamma_hat", w).get<std::vector<double>>();
  for (const auto & item : require(j, "tau", w).items()) { r.tau.push_back(number(item.value(), w + ".tau")); }
  r.lmi_residual = number(require(j, "lmi_residual", w), w + ".lmi_residual");
  r.max_violation = number(require(j, "max_violation", w), w + ".max_violation");
  r.recovery_consistent = require(j, "recovery_consistent", w).get<bool>();
  ControllerRealization & c = r.controllers;
  c.order = n_c;
  const Json & agents = require(j, "controllers", w);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string aw = w + ".controllers[" + std::to_string(i) + "]";
    const Json & a = agents[i];
    auto mat = [&](const char * key, Eigen::Index rows_if_empty, Eigen::Index cols_if_empty) {
      const Json & v = require(a, key, aw);
      // empty blocks serialize as [] (n_c = 0)
      if (v.is_array() && v.empty()) { return Matrix(rows_if_empty, cols_if_empty); }
      return matrix_from_json(v, aw + "." + key);
    };
    const Matrix d = matrix_from_json(require(a, "d_c", aw), aw + ".d_c");
    c.a_c.push_back(mat("a_c", 0, 0));
    c.b_c.push_back(mat("b_c", 0, d.cols()));
    c.c_c.push_back(mat("c_c", d.rows(), 0));
    c.d_c.push_back(d);
  }
  if (j.contains("recovery_residual_c")) { c.residual_c = j.at("recovery_residual_c").get<std::vector<double>>(); }
  if (j.contains("recovery_residual_d")) { c.residual_d = j.at("recovery_residual_d").get<std::vector<double>>(); }
  if (j.contains("robustness_degrees")) { c.robustness_degrees = j.at("robustness_degrees").get<std::vector<double>>(); }
  const Json & cert = require(j, "certificate", w);
  r.p_bar_s = matrix_from_json(require(cert, "p_bar_s", w + ".certificate"), w + ".certificate.p_bar_s");
  for (const auto & m : require(cert, "p_c", w + ".certificate")) { r.p_c.push_back(matrix_from_json(m, w + ".certificate.p_c")); }
  r.x = vector_from_json(require(j, "decision_vector", w), w + ".decision_vector");
  if (j.contains("warnings")) { r.warnings = j.at("warnings").get<std::vector<std::string>>(); }
  return r;
}

Json trajectory_meta(const Trajectory & t)
{
  Json j;
  j["format"] = "consynth-trajectory 1";
  j["n_agents"] = t.n_agents;
  j["n"] = t.n;
  j["n_c"] = t.n_c;
  j["m"] = t.m;
  j["q"] = t.q;
  j["samples"] = t.size();
  j["status"] = to_string(t.status);
  j["message"] = t.message;
  j["seed"] = t.seed;
  j["dt"] = t.dt;
  j["horizon"] = t.horizon;
  j["integrator"] = to_string(t.integrator);
  j["record_every"] = t.record_every;
  j["disturbance"] = t.disturbance;
  j["perturbations"] = t.perturbations;
  j["clip_events"] = Json{{"a_c", t.clip_events[0]}, {"b_c", t.clip_events[1]}, {"c_c", t.clip_events[2]}, {"d_c", t.clip_events[3]}};
  return j;
}

namespace {

void header_group(std::ostream & os, const char * name, int agents, int width)
{
  for (int i = 1; i <= agents; ++i) {
    for (int k = 1; k <= width; ++k) { os << ',' << name << '[' << i << "][" << k << ']'; }
  }
}

void row_group(std::ostream & os, const Vector & v)
{
  for (Eigen::Index i = 0; i < v.size(); ++i) { os << ',' << format_double(v(i)); }
}

}  // namespace

void write_trajectory_csv(std::ostream & os, const Trajectory & t)
{
  os << 't';
  header_group(os, "x", t.n_agents, t.n);
  header_group(os, "xc", t.n_agents, t.n_c);
  header_group(os, "u", t.n_agents, t.m);
  header_group(os, "y", t.n_agents, t.q);
  header_group(os, "xi", t.n_agents, t.n);
  os << '\n';
  for (std::size_t k = 0; k < t.size(); ++k) {
    os << format_double(t.times[k]);
    row_group(os, t.x[k]);
    row_group(os, t.x_c[k]);
    row_group(os, t.u[k]);
    row_group(os, t.y[k]);
    row_group(os, t.xi[k]);
    os << '\n';
  }
}

Trajectory read_trajectory_csv(std::istream & is, const Json & meta)
{
  const std::string w = "trajectory metadata";
  if (!meta.is_object() || string_or(meta, "format", "", w) != "consynth-trajectory 1") {
    throw ConfigError(w + ": not a consynth trajectory");
  }
  Trajectory t;
  t.n_agents = integer(require(meta, "n_agents", w), w);
  t.n = integer(require(meta, "n", w), w);
  t.n_c = integer(require(meta, "n_c", w), w);
  t.m = integer(require(meta, "m", w), w);
  t.q = integer(require(meta, "q", w), w);
  t.status = sim_status_from_string(string_or(meta, "status", "completed", w));
  t.message = string_or(meta, "message", "", w);
  t.seed = require(meta, "seed", w).get<std::uint64_t>();
  t.dt = number(require(meta, "dt", w), w);
  t.horizon = number(require(meta, "horizon", w), w);
  t.integrator = integrator_from_string(string_or(meta, "integrator", "rk4", w));
  t.record_every = integer(require(meta, "record_every", w), w);
  t.disturbance = boolean_or(meta, "disturbance", false, w);
  t.perturbations = boolean_or(meta, "perturbations", false, w);
  if (meta.contains("clip_events")) {
    const Json & c = meta.at("clip_events");
    t.clip_events = {c.value("a_c", 0L), c.value("b_c", 0L), c.value("c_c", 0L), c.value("d_c", 0L)};
  }
  const int na = t.n_agents;
  const std::size_t width = 1 + static_cast<std::size_t>(na * (2 * t.n + t.n_c + t.m + t.q));
  std::string line;
  if (!std::getline(is, line)) { throw ConfigError("trajectory: empty file"); }
  std::vector<double> vals;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) { continue; }
    vals.clear();
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t end = std::min(line.find(',', pos), line.size());
      double v = 0.0;
      const auto res = std::from_chars(line.data() + pos, line.data() + end, v);
      if (res.ec != std::errc() || res.ptr != line.data() + end) {
        throw ConfigError("trajectory: bad number on line " + std::to_string(line_no));
      }
      vals.push_back(v);
      pos = end + 1;
    }
    if (vals.size() != width) { throw ConfigError("trajectory: wrong column count on line " + std::to_string(line_no)); }
    std::size_t c = 0;
    auto take = [&](int count) {
      Vector v(count);
      for (int i = 0; i < count; ++i) { v(i) = vals[c++]; }
      return v;
    };
    t.times.push_back(vals[c++]);
    t.x.push_back(take(na * t.n));
    t.x_c.push_back(take(na * t.n_c));
    t.u.push_back(take(na * t.m));
    t.y.push_back(take(na * t.q));
    t.xi.push_back(take(na * t.n));
  }
  return t;
}

void write_consensus_csv(std::ostream & os, const MetricsReport & m, const Trajectory & t)
{
  const bool with_v = m.lyapunov.size() == t.size();
  os << "t,consensus_error";
  if (with_v) { os << ",lyapunov"; }
  header_group(os, "u", t.n_agents, t.m);
  os << '\n';
  for (std::size_t k = 0; k < t.size(); ++k) {
    os << format_double(t.times[k]) << ',' << format_double(m.consensus_error[k]);
    if (with_v) { os << ',' << format_double(m.lyapunov[k]); }
    row_group(os, t.u[k]);
    os << '\n';
  }
}

Json metrics_to_json(const MetricsReport & m)
{
  Json j;
  j["initial_consensus_error"] = m.initial_error;
  j["final_consensus_error"] = m.final_error;
  j["final_ratio"] = m.final_ratio;
  j["settling_5_percent"] = settling_to_json(m.settle_5);
  j["settling_1_percent"] = settling_to_json(m.settle_1);
  Json idx = Json::array();
  for (std::size_t i = 0; i < m.indices.size(); ++i) {
    Json a = indices_to_json(m.indices[i]);
    a["agent"] = i + 1;
    idx.push_back(a);
  }
  j["performance_indices"] = idx;
  Json ref = Json::array();
  for (const auto & r : published_reference_indices()) {
    Json a = indices_to_json(r.indices);
    a["agent"] = r.agent;
    ref.push_back(a);
  }
  j["published_reference_indices"] = Json{
    {"note", "published reference for the robust design on the manipulator example; solver-dependent, not asserted"},
    {"agents", ref}};
  if (m.dissipation) {
    j["dissipation"] = Json{{"samples", m.dissipation->samples},
                            {"violations", m.dissipation->violations},
                            {"max_value", finite_or_null(m.dissipation->max_value)},
                            {"max_relative", finite_or_null(m.dissipation->max_relative)}};
  }
  if (m.hinf) {
    j["hinf"] = Json{{"output_energy", m.hinf->output_energy},
                     {"disturbance_energy", m.hinf->disturbance_energy},
                     {"ratio", m.hinf->ratio ? Json(*m.hinf->ratio) : Json(nullptr)},
                     {"zero_initial_state", m.hinf->zero_initial_state}};
  }
  return j;
}

Json verification_to_json(const VerificationReport & v)
{
  Json a = Json::array();
  for (const auto & c : v.checks) {
    a.push_back(Json{{"name", c.name}, {"evaluated", c.evaluated}, {"passed", c.passed},
                     {"value", finite_or_null(c.value)}, {"detail", c.detail}});
  }
  return a;
}

}  // namespace consynth
