// Closed-loop assembly and simulation: the six control-law shapes, a fixed
// step RK4 integrator aligned to the switching grid, trajectory metrics,
// structural verifiers (spectrum separation, steady-state Sylvester check)
// and CSV export.
#pragma once

#include "coopreg/observers.hpp"
#include "coopreg/plantmodel.hpp"
#include "coopreg/synthesis.hpp"
#include "coopreg/types.hpp"

#include <algorithm>
#include <iosfwd>
#include <limits>
#include <optional>

namespace coopreg::simkit {

// State-norm bound beyond which a run is declared divergent.
inline constexpr double kDivergenceGuard = 1e12;

struct ControlLaw {
  plantmodel::LawKind kind;
  synthesis::GainSet gains;
};

// Stacked closed-loop system over state y = [x_1..x_N, z_1..z_N,
// eta_1..eta_N, v]. All law kinds reduce to static input maps plus
// piecewise-LTI dynamics, so the vector field is linear in y for each graph.
struct ClosedLoopSystem {
  plantmodel::Scenario sc;
  ControlLaw law;

  int N = 0;
  Eigen::Index nx = 0, nz = 0, d_eta = 0, q = 0;
  std::vector<Eigen::Index> x_off, z_off;  // per-agent offsets into blocks
  std::vector<Eigen::Index> z_dim;

  Matrix S_exo;
  Matrix S_est, C_est;  // estimator pair for distributed kinds
  bool eta_tracks_full_v = false;

  // Per-agent matrices assembled once (the vector field runs hot in RK4).
  struct AgentCache {
    Matrix E, F, F_meas;
    Matrix Abar, Bbar, Cbar, Em;  // compensator blocks, measurement laws only
  };
  std::vector<AgentCache> cache;

  Eigen::Index state_dim() const { return nx + nz + d_eta * N; }
  Eigen::Index total_dim() const { return state_dim() + q; }

  // [x0; z0 = 0; eta0 = 0; v0]
  Vector initial_state() const;

  Vector derivative(const Vector& y, int graph_index) const;

  // Static maps of the stacked state (law inputs and regulated errors).
  Vector agent_input(const Vector& y, int agent) const;
  Vector agent_error(const Vector& y, int agent) const;

  // Views into the stacked state.
  Vector agent_x(const Vector& y, int agent) const;
  Vector agent_z(const Vector& y, int agent) const;
  Vector agent_eta(const Vector& y, int agent) const;
  Vector exo_v(const Vector& y) const;
};

// Validates dimensions and law/gain compatibility, then binds the pieces.
ClosedLoopSystem assemble(const plantmodel::Scenario& sc,
                          const ControlLaw& law);

struct Trajectory {
  std::vector<double> times;
  std::vector<int> graph_index;
  std::vector<Vector> v;
  // outer index: agent (followers), inner: sample
  std::vector<std::vector<Vector>> x, z, eta, u, e;
  // adaptive observer study only: generator estimates per follower
  std::vector<std::vector<Matrix>> s_hat;
  Matrix exo_S;               // generator the estimates chase
  int refined_intervals = 0;  // segments whose step had to shrink to align

  int agent_count() const {
    return static_cast<int>(std::max(x.size(), eta.size()));
  }
};

// Fixed-step RK4 over the switching segments; switching instants always land
// on the grid (steps shrink per segment when the nominal step does not
// divide it). Throws DivergenceError past the guard norm.
Trajectory integrate(const ClosedLoopSystem& sys, double horizon, double step,
                     const std::optional<Vector>& y0 = std::nullopt);

// Observer-only studies (discrete / adaptive / sync_ref law kinds). The
// discrete variant runs the exact recursion with horizon counted in steps.
Trajectory simulate_observer_study(const plantmodel::Scenario& sc,
                                   const synthesis::GainSet& gains);

struct AgentMetrics {
  double final_max_error = 0.0;           // max |e_i| over the last 10%
  double final_max_observer_error = 0.0;  // max ||eta_i - v|| over the last 10%
  double final_max_generator_error = 0.0;  // max ||S_hat_i - S||, adaptive
  double convergence_time =
      std::numeric_limits<double>::infinity();  // first time |e_i| stays below
  double steady_x_residual = 0.0;              // ||x_i - X_i v|| at the end
  double steady_u_residual = 0.0;              // ||u_i - U_i v|| at the end
};

struct MetricsSummary {
  std::vector<AgentMetrics> agents;
  double window_start = 0.0;
  double max_final_error = 0.0;
  double max_final_observer_error = 0.0;
  double max_final_generator_error = 0.0;
  bool converged(double threshold) const {
    return max_final_error <= threshold;
  }
};

// Tail-window statistics; gains (when given) provide the regulator pair for
// steady-state residuals. The observer error compares eta against v or its
// measured tail, matching the estimate dimension.
MetricsSummary metrics(const Trajectory& tr, double threshold,
                       const synthesis::GainSet* gains = nullptr);

struct SeparationReport {
  bool pass = false;
  double max_mismatch = 0.0;
  std::vector<Complex> closed_loop;  // spectrum of the assembled A_c
  std::vector<Complex> predicted;    // union of the designed blocks
};

// Static graphs only: checks sigma(A_c) against the multiset union of the
// feedback, local-observer and distributed-observer spectra.
SeparationReport verify_separation(const ClosedLoopSystem& sys,
                                   double tolerance = 1e-7);

struct SylvesterReport {
  Matrix Xc;
  double residual = 0.0;  // Frobenius norm of C_c Xc + D_c
};

// Solves Xc S = A_c Xc + B_c for the closed loop and reports the regulated
// output defect. Requires sigma(A_c) disjoint from sigma(S).
SylvesterReport verify_sylvester_steady_state(const ClosedLoopSystem& sys);

// Integrate xdot = A x + forcing(t) from x0 and test ||x(T)|| <= threshold.
bool input_decay_check(const Matrix& A, const observers::Signal& forcing,
                       const Vector& x0, double horizon, double step,
                       double threshold);

// One row per (time, agent); exosystem rows use agent id 0 with v in the x
// columns. Heterogeneous dimensions are padded with empty fields. 17
// significant digits.
void write_trajectory_csv(const Trajectory& tr, std::ostream& os);

}  // namespace coopreg::simkit
