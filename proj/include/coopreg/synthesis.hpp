// Gain synthesis: regulator equations, rank condition, state feedback,
// feedforward, local Luenberger observers, and the full per-scenario
// pipeline including the distributed-observer gain rules.
#pragma once

#include "coopreg/observers.hpp"
#include "coopreg/plantmodel.hpp"
#include "coopreg/types.hpp"

namespace coopreg::synthesis {

struct RegulatorSolution {
  Matrix X;  // n x q
  Matrix U;  // m x q
  double residual = 0.0;
  bool exact = false;
};

// Solve X S = A X + B U + E, 0 = C X + D U + F for (X, U). Throws
// UnsolvableError when inconsistent unless allow_residual is set, in which
// case the least-squares pair is returned with exact = false.
RegulatorSolution solve_regulator(const plantmodel::PlantAgent& agent,
                                  const Matrix& S, bool allow_residual = false);

struct RankConditionEntry {
  Complex lambda;
  Eigen::Index rank;
  Eigen::Index required;  // n + p
  bool pass;
};

struct RankConditionReport {
  std::vector<RankConditionEntry> entries;
  bool all_pass = true;
  std::vector<Complex> failures() const;
};

// rank [[A - lambda I, B], [C, D]] = n + p at every distinct exosystem mode.
RankConditionReport check_rank_condition(const plantmodel::PlantAgent& agent,
                                         const Matrix& S);

// K1 = -B'P from the state-feedback Riccati equation; A + B K1 is Hurwitz.
Matrix design_feedback(const plantmodel::PlantAgent& agent);

// K2 = U - K1 X.
Matrix feedforward(const Matrix& X, const Matrix& U, const Matrix& K1);

struct LuenbergerDesign {
  Matrix L;    // (n + q_u) x p_m
  Matrix A_L;  // Abar - L Cbar, Hurwitz
};

// Output-injection gain for the composite pair (Cbar, Abar) by duality.
// Throws SynthesisError when the pair is undetectable.
LuenbergerDesign design_luenberger(const plantmodel::PlantAgent& agent,
                                   const Matrix& S_u);

struct AgentGains {
  Matrix K1;
  Matrix K2u;  // columns acting on v_u (or its estimate inside z)
  Matrix K2m;  // columns acting on v_m (or its estimate eta)
  Matrix L;    // empty for full-information laws
  Matrix X;
  Matrix U;
};

struct GainSet {
  std::vector<AgentGains> agents;
  observers::ObserverGains observer;  // meaningful for distributed laws
  bool has_observer = false;
};

// Full pipeline for a scenario under its configured law: regulator solutions,
// feedback/feedforward, local observers where the law is measurement-based,
// and the distributed-observer gains picked by topology:
//   static graph            -> scaled Riccati rule (mu = 1/delta)
//   switching, undirected   -> marginal Lyapunov rule (mu = 1)
//   switching, directed     -> identity-output rule, user-supplied mu
// A LawSpec mu overrides the designed coupling gain.
GainSet synthesize(const plantmodel::Scenario& sc);

struct SolvabilityEntry {
  RankConditionReport rank;
  RegulatorSolution regulator;  // least-squares when not exact
};

struct SolvabilityReport {
  std::vector<SolvabilityEntry> agents;
  bool all_exact = true;
};

// Rank condition and regulator residual for every agent, never throwing on
// near-solvable systems.
SolvabilityReport solvability_report(const plantmodel::Scenario& sc);

}  // namespace coopreg::synthesis
