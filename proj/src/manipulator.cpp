#include "consynth/manipulator.hpp"

namespace consynth::manipulator {

Matrix a_bar()
{
  Matrix a(4, 4);
  a << 0, 1, 0, 0,
       -48.6, -1.25, 48.6, 0,
       0, 0, 0, 1,
       19.5, 0, -19.5, 0;
  return a;
}

Matrix b()
{
  Matrix m(4, 1);
  m << 0, 21.6, 0, 0;
  return m;
}

Matrix c_bar()
{
  Matrix c(2, 4);
  c << 1, 0, 0, 0,
       0, 1, 0, 0;
  return c;
}

Matrix adjacency()
{
  Matrix a(3, 3);
  a << 0, 1, 0,
       0, 0, 1,
       1, 0, 0;
  return a;
}

Matrix h_bar()
{
  Matrix h(1, 4);
  h << 0, 0, 1, 0;
  return h;
}

NonlinearitySpec nonlinearity()
{
  NonlinearitySpec s;
  s.kind = NonlinearitySpec::Kind::kSine;
  s.source = 2;
  s.target = 3;
  s.gain = kAlphaBar;
  return s;
}

AgentModel agent()
{
  AgentModel ag;
  ag.a_bar = a_bar();
  ag.b = b();
  ag.c_bar = c_bar();
  ag.h_bar = h_bar();
  ag.alpha_bar = kAlphaBar;
  ag.nonlinearity = make_nonlinearity(nonlinearity(), 4);
  return ag;
}

MultiAgentSystem system()
{
  return assemble_global(std::vector<AgentModel>(kAgents, agent()), NetworkGraph::from_adjacency(adjacency()));
}

PerturbationBounds bounds() { return PerturbationBounds{0.5, 0.2, 0.2, 0.2}; }

SynthesisProblem problem(const SynthesisOptions & options)
{
  SynthesisProblem p;
  p.mas = system();
  p.reduced = build_reduced(p.mas);
  p.n_c = kOrder;
  p.weights = DesignWeights::scaled_identity(1.0, 2.0, kAgents, 4, kOrder);
  p.bounds = bounds();
  p.h_hat = Matrix::Identity((kAgents - 1) * 4, (kAgents - 1) * 4);
  p.h_hat_blocks = std::vector<int>(kAgents - 1, 4);
  p.options = options;
  return p;
}

}  // namespace consynth::manipulator
