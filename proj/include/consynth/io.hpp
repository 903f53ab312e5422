#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "consynth/analysis.hpp"
#include "consynth/synthesis.hpp"

namespace consynth {

using Json = nlohmann::ordered_json;

/// Schema violation in a config or result file.
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Synthesis variants selectable from the command line.
enum class RunMode { kTheorem1, kCorollary1, kStatic };

std::string to_string(RunMode m);
RunMode run_mode_from_string(const std::string & s);
SynthesisMode synthesis_mode(RunMode m);

struct RunConfig
{
  std::vector<AgentModel> agents;
  std::vector<NonlinearitySpec> nonlinearities;
  Matrix adjacency;
  int n_c = 0;
  RunMode mode = RunMode::kTheorem1;
  /// scalar shorthand when the block lists are empty
  double r_scale = 1.0, q_scale = 1.0;
  std::vector<Matrix> r_blocks, q_blocks;
  double h_hat_scale = 1.0;
  std::vector<Matrix> h_hat_blocks;
  PerturbationBounds bounds;
  SynthesisOptions synthesis;
  SimConfig simulation;
  bool perturbations = true;
  std::string output_dir = "out";
};

/// Strict parse: unknown keys, missing required keys and bad shapes throw
/// ConfigError.
RunConfig parse_config(const Json & j);
RunConfig load_config(const std::string & path);
Json config_to_json(const RunConfig & cfg);

/// Builds the synthesis problem; static mode forces n_c = 0. Throws
/// GraphError for a disconnected graph.
SynthesisProblem build_problem(const RunConfig & cfg, RunMode mode);
MultiAgentSystem build_system(const RunConfig & cfg);

/// Simulation settings with the built-in perturbations attached when enabled
/// and the controller has matching dimensions.
SimConfig build_sim_config(const RunConfig & cfg, const SynthesisProblem & problem);

Json matrix_to_json(const Matrix & m);
Matrix matrix_from_json(const Json & j, const std::string & what);

Json synthesis_to_json(const SynthesisResult & r, RunMode mode, int n_c);
/// Returns the stored run mode through `mode`.
SynthesisResult synthesis_from_json(const Json & j, RunMode & mode);

Json trajectory_meta(const Trajectory & t);
/// Columns t, x[i][j], xc[i][j], u[i][j], y[i][j], xi[i][j] (1-based agent
/// and component indices), shortest round-trip decimal format.
void write_trajectory_csv(std::ostream & os, const Trajectory & t);
/// Inverse of write_trajectory_csv plus trajectory_meta.
Trajectory read_trajectory_csv(std::istream & is, const Json & meta);

/// Columns t, consensus_error, lyapunov (when available), u[i][j].
void write_consensus_csv(std::ostream & os, const MetricsReport & m, const Trajectory & t);

Json metrics_to_json(const MetricsReport & m);
Json verification_to_json(const VerificationReport & v);

/// Shortest decimal that round-trips.
std::string format_double(double v);

Json read_json_file(const std::string & path);
void write_text_file(const std::string & path, const std::string & text);

}  // namespace consynth
