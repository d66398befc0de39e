// Plant-side data model: exosystem with measured/unmeasured split,
// heterogeneous agents, scenario container, assumption checks, and the
// builders that reduce containment / local-exosystem setups to the
// leader-following form.
#pragma once

#include "coopreg/topology.hpp"
#include "coopreg/types.hpp"

#include <optional>

namespace coopreg::plantmodel {

// Exogenous signal v = col(v_u, v_m) generated by vdot = S v with
// S = blkdiag(S_u, S_m). Only v_m shows up in the leader output
// y_m0 = C_m0 v_m = C0 v.
struct Exosystem {
  Matrix S_u{0, 0};
  Matrix S_m{0, 0};
  Matrix C_m0{0, 0};
  Vector v0_u{0};
  Vector v0_m{0};

  Eigen::Index q_u() const { return S_u.rows(); }
  Eigen::Index q_m() const { return S_m.rows(); }
  Eigen::Index q() const { return q_u() + q_m(); }
  Eigen::Index p0() const { return C_m0.rows(); }

  Matrix S() const;   // blkdiag(S_u, S_m)
  Matrix C0() const;  // [0, C_m0]
  Vector v0() const;  // col(v0_u, v0_m)

  void validate() const;
  // True iff no eigenvalue of S decays (advisory; decaying modes merely
  // vanish from the steady state).
  bool spectrum_has_no_decaying_modes() const;
};

// One follower:
//   xdot = A x + B u + [E_u, E_m] v
//   e    = C x + D u + [F_u, F_m] v          (regulated error)
//   y_m  = C_m x + D_m u + [F_mu, F_mm] v    (local measurement)
struct PlantAgent {
  Matrix A, B, C, D;
  Matrix E_u{0, 0}, E_m{0, 0};
  Matrix F_u{0, 0}, F_m{0, 0};
  Matrix C_m, D_m;
  Matrix F_mu{0, 0}, F_mm{0, 0};
  Vector x0;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index p() const { return C.rows(); }
  Eigen::Index p_m() const { return C_m.rows(); }

  Matrix E() const;       // [E_u, E_m]
  Matrix F() const;       // [F_u, F_m]
  Matrix F_meas() const;  // [F_mu, F_mm]

  // Composite plant+unmeasured-exo blocks used by the dynamic compensator:
  // Abar = [[A, E_u], [0, S_u]], Bbar = [B; 0], Cbar = [C_m, F_mu].
  Matrix composite_A(const Matrix& S_u) const;
  Matrix composite_B() const;
  Matrix composite_C() const;
  Matrix composite_E_m() const;  // [E_m; 0]

  void validate(Eigen::Index q_u, Eigen::Index q_m) const;
};

// Which law the scenario runs. The first six are closed-loop control laws;
// the last three run an observer study without plants.
enum class LawKind {
  decentralized_full_info,
  decentralized_measurement,
  distributed_full_info,
  distributed_measurement,
  special_vm_only,
  special_vu_only,
  discrete_observer,
  adaptive_observer,
  sync_ref,
};

bool law_is_closed_loop(LawKind kind);

struct LawSpec {
  LawKind kind = LawKind::distributed_measurement;
  std::optional<double> mu;  // overrides the designed coupling gain
  double threshold = 1e-3;   // convergence threshold for metrics / exit code
};

struct Scenario {
  std::vector<PlantAgent> agents;
  Exosystem exo;
  topology::SwitchingSchedule schedule;
  double horizon = 0.0;
  double step = 1e-3;
  LawSpec law;
  // Initial observer estimates, one per follower (empty = zeros). Observer
  // studies (notably sync_ref, whose limit depends on them) read these.
  std::vector<Vector> eta0;

  int follower_count() const { return schedule.graphs.front().follower_count(); }
  void validate() const;
};

struct AgentAssumptions {
  bool stabilizable = false;
  bool composite_detectable = false;
  bool regulator_exact = false;
  double regulator_residual = 0.0;
  bool rank_condition = false;
  std::vector<Complex> rank_failures;  // exosystem modes where the rank drops
};

struct AssumptionReport {
  std::vector<AgentAssumptions> agents;
  bool exo_no_decay = true;  // advisory only
  bool topology_certified = false;
  std::string topology_note;
  topology::JointConnectivityReport joint;

  bool all_pass() const;  // every mandatory item (exo_no_decay excluded)
  std::string describe() const;
};

// Checks stabilizability, composite detectability, regulator solvability and
// topology connectivity for every agent of a scenario.
AssumptionReport validate_assumptions(const Scenario& sc);

// Containment: l >= 2 leaders v_i' = S_i v_i of common dimension q0 and
// convex weights alpha define the reference r = sum_i alpha_i v_i. Returns
// the stacked exosystem (fully measured, C_m0 = [alpha_1 I, ..., alpha_l I])
// and rewrites each agent's error map to e_i = C x + D u + (F1 - F2) v.
struct ContainmentSpec {
  std::vector<Matrix> leader_S;
  std::vector<Vector> leader_v0;
  Vector alpha;
};

struct ContainmentModel {
  Exosystem exo;
  Matrix F2;  // p0 x q reference map, r = F2 v
};

ContainmentModel build_containment(const ContainmentSpec& spec);

// Rewrite one agent against the containment exosystem. F1 is the agent's
// direct v-feed in the error (commonly zero), shaped p x (l*q0).
PlantAgent apply_containment(const PlantAgent& agent, const Matrix& F1,
                             const ContainmentModel& model);

// Local exogenous signals: agent i owns a generator S_loc[i] driving only its
// own maps (written against q_loc[i] columns). Stacks the generators into one
// measured exosystem (C_m0 = I) and zero-pads every agent's E/F/F_m blocks
// into the global column layout.
struct LocalExoResult {
  Exosystem exo;
  std::vector<PlantAgent> agents;
};

LocalExoResult localize_exogenous(const std::vector<Matrix>& local_S,
                                  const std::vector<Vector>& local_v0,
                                  const std::vector<PlantAgent>& agents);

}  // namespace coopreg::plantmodel
