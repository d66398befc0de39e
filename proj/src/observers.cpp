#include "coopreg/observers.hpp"

#include "coopreg/numkit.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace coopreg::observers {

using plantmodel::LawKind;

EstimatedPair estimated_pair(const plantmodel::Exosystem& exo, LawKind kind) {
  switch (kind) {
    case LawKind::distributed_measurement:
      return {exo.S_m, exo.C_m0, false};
    case LawKind::distributed_full_info:
    case LawKind::special_vm_only:
    case LawKind::discrete_observer:
    case LawKind::adaptive_observer:
    case LawKind::sync_ref:
      return {exo.S(), exo.C0(), true};
    default:
      throw PreconditionError("law has no distributed observer");
  }
}

ObserverGains design_gain_switching_undirected(const Matrix& S,
                                               const Matrix& C) {
  if (!numkit::pbh_observable(S, C))
    throw PreconditionError(
        "observer gain: (C0, S) observability failed "
        "(switching-undirected rule)");
  ObserverGains g;
  g.mu = 1.0;
  g.L0 = numkit::solve_lyap_marginal(S) * C.transpose();
  g.rule = "marginal-lyapunov switching-undirected";
  return g;
}

ObserverGains design_gain_static(const Matrix& S, const Matrix& C,
                                 double delta) {
  if (delta <= 0.0)
    throw PreconditionError("observer gain: delta must be positive");
  if (!numkit::pbh_detectable(S, C))
    throw PreconditionError(
        "observer gain: (C0, S) detectability failed (static rule)");
  const Matrix P = numkit::solve_are(S.transpose(), C.transpose());
  ObserverGains g;
  g.mu = 1.0 / delta;
  g.L0 = P * C.transpose();
  g.rule = "scaled-riccati static";
  return g;
}

ObserverGains design_gain_identity_output_static(const Matrix& S,
                                                 double delta) {
  if (delta <= 0.0)
    throw PreconditionError("observer gain: delta must be positive");
  ObserverGains g;
  const double worst = numkit::spectrum(S).max_real();
  g.mu = (1.0 + std::max(0.0, worst)) / delta + 1.0;
  g.L0 = Matrix::Identity(S.rows(), S.rows());
  g.rule = "identity-output static";
  return g;
}

namespace {

double operator_norm(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

}  // namespace

ObserverGains design_gain_discrete(
    const Matrix& S, const Matrix& C,
    const std::vector<topology::WeightedDigraph>& graphs) {
  if (graphs.empty())
    throw PreconditionError("discrete observer gain: no graphs");
  if (numkit::spectral_radius(S) > 1.0 + numkit::kSpectrumTol)
    throw PreconditionError(
        "discrete observer gain: spectral radius of S exceeds one");

  // Real block-diagonal form of S'; requires semi-simple eigenvalues.
  const auto jordan = numkit::real_block_diagonalize(S.transpose());
  const Matrix T_inv = jordan.T.inverse();
  const Matrix PtP = T_inv.transpose() * T_inv;
  const Matrix Bbar = T_inv * C.transpose();
  const Matrix M =
      jordan.D.transpose() * Bbar * Bbar.transpose() * jordan.D;

  ObserverGains g;
  g.L0 = S * PtP * C.transpose();
  g.mu_bound = std::numeric_limits<double>::infinity();
  const double norm_M = operator_norm(M);
  for (const auto& graph : graphs) {
    const Matrix H = topology::h_matrix(graph);
    if ((H - H.transpose()).norm() > 1e-12 * (1.0 + H.norm()))
      throw PreconditionError(
          "discrete observer gain: H must be symmetric "
          "(undirected follower graph)");
    const double denom = operator_norm(H) * norm_M;
    if (denom > 0.0) g.mu_bound = std::min(g.mu_bound, 1.0 / denom);
  }
  if (!std::isfinite(g.mu_bound))
    throw PreconditionError(
        "discrete observer gain: coupling bound is unbounded "
        "(no informative graph)");
  g.mu = g.mu_bound;
  g.rule = "discrete-jordan";
  return g;
}

std::vector<Complex> eigenvalue_formula(const Matrix& S, const Matrix& H,
                                        double mu) {
  const auto ls = numkit::spectrum(S).values;
  const auto lh = numkit::spectrum(H).values;
  std::vector<Complex> out;
  out.reserve(ls.size() * lh.size());
  for (const auto& a : ls)
    for (const auto& b : lh) out.push_back(a - mu * b);
  std::sort(out.begin(), out.end(), [](const Complex& x, const Complex& y) {
    if (x.real() != y.real()) return x.real() < y.real();
    return x.imag() < y.imag();
  });
  return out;
}

Matrix error_matrix(const Matrix& S_est, const Matrix& C_est, const Matrix& L0,
                    double mu, const topology::WeightedDigraph& g) {
  const int N = g.follower_count();
  const Matrix I_N = Matrix::Identity(N, N);
  return numkit::kron(I_N, S_est) -
         mu * numkit::kron(topology::h_matrix(g), L0 * C_est);
}

ObserverBank make_bank(const Matrix& S_est, const Matrix& C_est,
                       const ObserverGains& gains, int followers) {
  if (followers < 1)
    throw ValidationError("observer bank needs at least one follower");
  ObserverBank bank;
  bank.S_est = S_est;
  bank.C_est = C_est;
  bank.mu = gains.mu;
  bank.L0 = gains.L0;
  bank.mu1 = gains.mu1;
  bank.mu2 = gains.mu2;
  bank.eta.assign(followers, Vector::Zero(S_est.rows()));
  return bank;
}

namespace {

void check_graph(const ObserverBank& bank, const topology::WeightedDigraph& g) {
  if (g.node_count() != bank.followers() + 1)
    throw DimensionError("observer step: graph size does not match bank");
}

// Stacked consensus-correction field shared by the continuous variants.
// leader_value empty => leader edges ignored (reference-generator mode).
Vector consensus_field(const ObserverBank& bank,
                       const topology::WeightedDigraph& g,
                       const Vector& stacked, const Vector* leader_value) {
  const auto d = bank.dim();
  const int N = bank.followers();
  const Matrix gain = bank.mu * bank.L0 * bank.C_est;
  Vector out(N * d);
  for (int i = 0; i < N; ++i) {
    const auto eta_i = stacked.segment(i * d, d);
    Vector acc = bank.S_est * eta_i;
    for (int j = 0; j < N; ++j) {
      const double a = g.adjacency(i + 1, j + 1);
      if (a > 0.0) acc += a * (gain * (stacked.segment(j * d, d) - eta_i));
    }
    const double a0 = g.adjacency(i + 1, 0);
    if (a0 > 0.0 && leader_value)
      acc += a0 * (gain * (*leader_value - eta_i));
    out.segment(i * d, d) = acc;
  }
  return out;
}

Vector stack(const std::vector<Vector>& parts) {
  Eigen::Index total = 0;
  for (const auto& p : parts) total += p.size();
  Vector out(total);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.segment(off, p.size()) = p;
    off += p.size();
  }
  return out;
}

void unstack(const Vector& stacked, std::vector<Vector>& parts) {
  Eigen::Index off = 0;
  for (auto& p : parts) {
    p = stacked.segment(off, p.size());
    off += p.size();
  }
}

template <typename Field>
Vector rk4(const Field& f, double t, const Vector& y, double dt) {
  const Vector k1 = f(t, y);
  const Vector k2 = f(t + 0.5 * dt, Vector(y + 0.5 * dt * k1));
  const Vector k3 = f(t + 0.5 * dt, Vector(y + 0.5 * dt * k2));
  const Vector k4 = f(t + dt, Vector(y + dt * k3));
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

void step_continuous(ObserverBank& bank, const Signal& v_m, double t,
                     const topology::WeightedDigraph& g, double dt) {
  check_graph(bank, g);
  const auto f = [&](double tau, const Vector& y) {
    const Vector leader = v_m(tau);
    return consensus_field(bank, g, y, &leader);
  };
  const Vector next = rk4(f, t, stack(bank.eta), dt);
  unstack(next, bank.eta);
}

void step_discrete(ObserverBank& bank, const Vector& v,
                   const topology::WeightedDigraph& g) {
  check_graph(bank, g);
  const auto d = bank.dim();
  const int N = bank.followers();
  const Matrix gain = bank.mu * bank.L0 * bank.C_est;
  std::vector<Vector> next(N);
  for (int i = 0; i < N; ++i) {
    Vector acc = bank.S_est * bank.eta[i];
    for (int j = 0; j < N; ++j) {
      const double a = g.adjacency(i + 1, j + 1);
      if (a > 0.0) acc += a * (gain * (bank.eta[j] - bank.eta[i]));
    }
    const double a0 = g.adjacency(i + 1, 0);
    if (a0 > 0.0) acc += a0 * (gain * (v - bank.eta[i]));
    next[i] = acc;
  }
  bank.eta = std::move(next);
}

void step_adaptive(ObserverBank& bank, const Matrix& S, const Signal& v,
                   double t, const topology::WeightedDigraph& g, double dt) {
  check_graph(bank, g);
  const auto d = bank.dim();
  const int N = bank.followers();
  if (static_cast<int>(bank.S_hat.size()) != N)
    throw ValidationError("adaptive step: S_hat not initialized");

  // State layout: N generator copies (column-major) then N estimates.
  const auto s2 = d * d;
  Vector y(N * s2 + N * d);
  for (int i = 0; i < N; ++i)
    y.segment(i * s2, s2) =
        Eigen::Map<const Vector>(bank.S_hat[i].data(), s2);
  for (int i = 0; i < N; ++i)
    y.segment(N * s2 + i * d, d) = bank.eta[i];

  const auto f = [&](double tau, const Vector& state) {
    const Vector leader = v(tau);
    Vector out(state.size());
    for (int i = 0; i < N; ++i) {
      const Matrix Si =
          Eigen::Map<const Matrix>(state.data() + i * s2, d, d);
      const auto eta_i = state.segment(N * s2 + i * d, d);
      Matrix dS = Matrix::Zero(d, d);
      Vector de = Si * eta_i;
      for (int j = 0; j < N; ++j) {
        const double a = g.adjacency(i + 1, j + 1);
        if (a <= 0.0) continue;
        const Matrix Sj =
            Eigen::Map<const Matrix>(state.data() + j * s2, d, d);
        dS += bank.mu1 * a * (Sj - Si);
        de += bank.mu2 * a * (state.segment(N * s2 + j * d, d) - eta_i);
      }
      const double a0 = g.adjacency(i + 1, 0);
      if (a0 > 0.0) {
        dS += bank.mu1 * a0 * (S - Si);
        de += bank.mu2 * a0 * (leader - eta_i);
      }
      out.segment(i * s2, s2) = Eigen::Map<const Vector>(dS.data(), s2);
      out.segment(N * s2 + i * d, d) = de;
    }
    return out;
  };

  const Vector next = rk4(f, t, y, dt);
  for (int i = 0; i < N; ++i) {
    bank.S_hat[i] = Eigen::Map<const Matrix>(next.data() + i * s2, d, d);
    bank.eta[i] = next.segment(N * s2 + i * d, d);
  }
}

void step_sync_ref(ObserverBank& bank, const topology::WeightedDigraph& g,
                   double dt) {
  check_graph(bank, g);
  const auto f = [&](double, const Vector& y) {
    return consensus_field(bank, g, y, nullptr);
  };
  const Vector next = rk4(f, 0.0, stack(bank.eta), dt);
  unstack(next, bank.eta);
}

}  // namespace coopreg::observers
