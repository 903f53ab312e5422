#pragma once

#include "consynth/synthesis.hpp"

/// Three single-link flexible-joint manipulators on a directed ring.
namespace consynth::manipulator {

constexpr int kAgents = 3;
constexpr int kOrder = 2;
constexpr double kAlphaBar = 3.33;

Matrix a_bar();
Matrix b();
Matrix c_bar();
/// Directed ring 1 <- 2 <- 3 <- 1 (a_12 = a_23 = a_31 = 1).
Matrix adjacency();
/// Selects the link angle x[2].
Matrix h_bar();
/// h = (0, 0, 0, -3.33 sin x[2])
NonlinearitySpec nonlinearity();

AgentModel agent();
MultiAgentSystem system();
PerturbationBounds bounds();

/// H_hat = R = I, Q = 2 I, n_c = 2.
SynthesisProblem problem(const SynthesisOptions & options = {});

}  // namespace consynth::manipulator
