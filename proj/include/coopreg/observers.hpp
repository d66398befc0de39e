// Distributed observers over the communication graph: gain design rules,
// error-system assembly, and steppers for the continuous, discrete, adaptive
// and reference-generator variants.
#pragma once

#include "coopreg/plantmodel.hpp"
#include "coopreg/topology.hpp"
#include "coopreg/types.hpp"

#include <functional>

namespace coopreg::observers {

// Gains for the consensus estimator
//   etadot_i = S_est eta_i + mu L0 sum_j a_ij C_est (eta_j - eta_i).
struct ObserverGains {
  double mu = 1.0;
  Matrix L0;
  double mu1 = 1.0;      // adaptive generator-consensus gain
  double mu2 = 1.0;      // adaptive state-consensus gain
  double mu_bound = 0.0; // discrete design: largest certified mu
  std::string rule;      // which design path produced the gains
};

// Which signal the estimator reconstructs under a given law.
struct EstimatedPair {
  Matrix S_est;
  Matrix C_est;
  bool full_v = false;  // estimates all of v rather than v_m
};
EstimatedPair estimated_pair(const plantmodel::Exosystem& exo,
                             plantmodel::LawKind kind);

// Switching undirected graphs, marginally stable S: mu = 1 and L0 = P C',
// P > 0 the kernel-exact solution of P S' + S P <= 0. Requires (C, S)
// observable.
ObserverGains design_gain_switching_undirected(const Matrix& S,
                                               const Matrix& C);

// Static leader-connected graph with delta = min Re(eig(H)): mu = 1/delta and
// L0 = P C' where S P + P S' - P C' C P + I = 0. Requires (C, S) detectable.
ObserverGains design_gain_static(const Matrix& S, const Matrix& C,
                                 double delta);

// Leader output is v itself (C = I): L0 = I with
// mu = (1 + max(0, max Re eig(S))) / delta + 1, then checked through the
// eigenvalue formula below.
ObserverGains design_gain_identity_output_static(const Matrix& S,
                                                 double delta);

// Discrete-time design from the real block-diagonal form of S'. Requires
// sigma(S) semi-simple with modulus <= 1 (modulus-1 part exactly semi-simple)
// and every H symmetric. mu is set to the certified bound
// min_p 1 / ||H_p (x) (Abar' Bbar Bbar' Abar)||.
ObserverGains design_gain_discrete(
    const Matrix& S, const Matrix& C,
    const std::vector<topology::WeightedDigraph>& graphs);

// Predicted spectrum {lambda_i(S) - mu lambda_j(H)} of the error system when
// L0 C = I, sorted by (real, imag).
std::vector<Complex> eigenvalue_formula(const Matrix& S, const Matrix& H,
                                        double mu);

// Error-system matrix (I_N (x) S_est) - mu (H (x) L0 C_est) for one graph.
Matrix error_matrix(const Matrix& S_est, const Matrix& C_est, const Matrix& L0,
                    double mu, const topology::WeightedDigraph& g);

// A bank of one estimate per follower. The leader slot is virtual: steppers
// receive the true exogenous signal where the law grants access to it.
struct ObserverBank {
  Matrix S_est;
  Matrix C_est;
  double mu = 1.0;
  Matrix L0;
  std::vector<Vector> eta;

  // adaptive variant state
  double mu1 = 1.0;
  double mu2 = 1.0;
  std::vector<Matrix> S_hat;

  int followers() const { return static_cast<int>(eta.size()); }
  Eigen::Index dim() const { return S_est.rows(); }
};

ObserverBank make_bank(const Matrix& S_est, const Matrix& C_est,
                       const ObserverGains& gains, int followers);

using Signal = std::function<Vector(double)>;

// One RK4 step of the consensus estimator; v_m(t) samples the leader signal
// at stage times.
void step_continuous(ObserverBank& bank, const Signal& v_m, double t,
                     const topology::WeightedDigraph& g, double dt);

// Exact one-step update of the discrete estimator, driven by the current
// leader value.
void step_discrete(ObserverBank& bank, const Vector& v,
                   const topology::WeightedDigraph& g);

// One RK4 step of the adaptive estimator: generator copies S_hat_i chase S
// through the graph while eta_i chases v. Raw-difference coupling from the
// leader and neighbours; requires bank.S_hat initialized.
void step_adaptive(ObserverBank& bank, const Matrix& S, const Signal& v,
                   double t, const topology::WeightedDigraph& g, double dt);

// One RK4 step of the leaderless reference generator (follower edges only).
void step_sync_ref(ObserverBank& bank, const topology::WeightedDigraph& g,
                   double dt);

}  // namespace coopreg::observers
