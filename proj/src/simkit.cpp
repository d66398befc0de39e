#include "coopreg/simkit.hpp"

#include "coopreg/numkit.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

namespace coopreg::simkit {

namespace {

using plantmodel::LawKind;

bool full_information(LawKind k) {
  return k == LawKind::decentralized_full_info ||
         k == LawKind::distributed_full_info;
}

bool uses_eta(LawKind k) {
  return k == LawKind::distributed_full_info ||
         k == LawKind::distributed_measurement ||
         k == LawKind::special_vm_only;
}

bool uses_compensator(LawKind k) {
  return k == LawKind::decentralized_measurement ||
         k == LawKind::distributed_measurement ||
         k == LawKind::special_vm_only || k == LawKind::special_vu_only;
}

void rk4_step(Vector& y, double h, const std::function<Vector(const Vector&)>& f) {
  const Vector k1 = f(y);
  const Vector k2 = f(y + (0.5 * h) * k1);
  const Vector k3 = f(y + (0.5 * h) * k2);
  const Vector k4 = f(y + h * k3);
  y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

void guard_state(const Vector& y, double t) {
  if (!y.allFinite() || y.norm() > kDivergenceGuard)
    throw DivergenceError("integration diverged: state norm exceeded guard",
                          t);
}

}  // namespace

Vector ClosedLoopSystem::initial_state() const {
  Vector y = Vector::Zero(total_dim());
  for (int i = 0; i < N; ++i) y.segment(x_off[i], sc.agents[i].n()) = sc.agents[i].x0;
  y.tail(q) = sc.exo.v0();
  return y;
}

Vector ClosedLoopSystem::agent_x(const Vector& y, int agent) const {
  return y.segment(x_off[agent], sc.agents[agent].n());
}

Vector ClosedLoopSystem::agent_z(const Vector& y, int agent) const {
  return y.segment(nx + z_off[agent], z_dim[agent]);
}

Vector ClosedLoopSystem::agent_eta(const Vector& y, int agent) const {
  return y.segment(nx + nz + agent * d_eta, d_eta);
}

Vector ClosedLoopSystem::exo_v(const Vector& y) const { return y.tail(q); }

Vector ClosedLoopSystem::agent_input(const Vector& y, int agent) const {
  const auto& gn = law.gains.agents[agent];
  const auto& a = sc.agents[agent];
  const Eigen::Index q_u = sc.exo.q_u();
  const Eigen::Index q_m = sc.exo.q_m();
  const LawKind k = law.kind;

  if (full_information(k)) {
    // w is the full exogenous feed: v itself or its distributed estimate.
    const Vector w =
        (k == LawKind::decentralized_full_info) ? exo_v(y) : agent_eta(y, agent);
    Vector u = gn.K1 * agent_x(y, agent);
    if (q_u > 0) u += gn.K2u * w.head(q_u);
    if (q_m > 0) u += gn.K2m * w.tail(q_m);
    return u;
  }

  // Measurement laws feed the compensator state z = [xi; zeta] back instead.
  const Vector z = agent_z(y, agent);
  Vector u = gn.K1 * z.head(a.n());
  if (q_u > 0) u += gn.K2u * z.tail(q_u);
  if (q_m > 0) {
    if (k == LawKind::decentralized_measurement)
      u += gn.K2m * exo_v(y).tail(q_m);
    else  // distributed_measurement / special_vm_only
      u += gn.K2m * agent_eta(y, agent);
  }
  return u;
}

Vector ClosedLoopSystem::agent_error(const Vector& y, int agent) const {
  const auto& a = sc.agents[agent];
  return a.C * agent_x(y, agent) + a.D * agent_input(y, agent) +
         cache[agent].F * exo_v(y);
}

Vector ClosedLoopSystem::derivative(const Vector& y, int graph_index) const {
  const auto& g = sc.schedule.graphs[static_cast<std::size_t>(graph_index)];
  const Eigen::Index q_m = sc.exo.q_m();
  const Vector v = exo_v(y);
  const Vector v_m = v.tail(q_m);

  Vector dy(y.size());
  dy.tail(q) = S_exo * v;

  std::vector<Vector> u(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) u[i] = agent_input(y, i);

  for (int i = 0; i < N; ++i) {
    const auto& a = sc.agents[i];
    dy.segment(x_off[i], a.n()) =
        a.A * agent_x(y, i) + a.B * u[i] + cache[i].E * v;
  }

  if (nz > 0) {
    for (int i = 0; i < N; ++i) {
      const auto& a = sc.agents[i];
      const auto& c = cache[i];
      const Vector z = agent_z(y, i);
      // Measured exogenous feed the compensator is allowed to see.
      Vector w;
      if (law.kind == LawKind::decentralized_measurement)
        w = v_m;
      else if (uses_eta(law.kind))
        w = agent_eta(y, i);
      else
        w = Vector(0);  // special_vu_only: q_m = 0
      const Vector y_m = a.C_m * agent_x(y, i) + a.D_m * u[i] + c.F_meas * v;
      const Vector innovation =
          y_m - c.Cbar * z - a.D_m * u[i] - a.F_mm * w;
      dy.segment(nx + z_off[i], z_dim[i]) =
          c.Abar * z + c.Bbar * u[i] + c.Em * w +
          law.gains.agents[i].L * innovation;
    }
  }

  if (d_eta > 0) {
    const double mu = law.gains.observer.mu;
    const Matrix& L0 = law.gains.observer.L0;
    const Vector leader = eta_tracks_full_v ? v : Vector(v.tail(q_m));
    const Eigen::Index base = nx + nz;
    for (int i = 0; i < N; ++i) {
      const Vector eta_i = agent_eta(y, i);
      Vector acc = Vector::Zero(d_eta);
      for (int j = 0; j <= N; ++j) {
        const double w_ij = g.adjacency(i + 1, j);
        if (w_ij <= 0.0) continue;
        const Vector& eta_j = (j == 0) ? leader : Vector(agent_eta(y, j - 1));
        acc += w_ij * (eta_j - eta_i);
      }
      dy.segment(base + i * d_eta, d_eta) =
          S_est * eta_i + mu * (L0 * (C_est * acc));
    }
  }
  return dy;
}

ClosedLoopSystem assemble(const plantmodel::Scenario& sc,
                          const ControlLaw& law) {
  sc.validate();
  if (!plantmodel::law_is_closed_loop(law.kind))
    throw PreconditionError(
        "assemble: law kind runs an observer study, not a closed loop");

  ClosedLoopSystem sys;
  sys.sc = sc;
  sys.law = law;
  sys.N = static_cast<int>(sc.agents.size());
  if (static_cast<int>(law.gains.agents.size()) != sys.N)
    throw DimensionError("assemble: gain count does not match agent count");

  const Eigen::Index q_u = sc.exo.q_u();
  const Eigen::Index q_m = sc.exo.q_m();
  sys.q = sc.exo.q();
  sys.S_exo = sc.exo.S();

  sys.x_off.resize(sys.N);
  sys.z_off.resize(sys.N);
  sys.z_dim.resize(sys.N);
  sys.cache.resize(sys.N);
  const bool comp = uses_compensator(law.kind);
  for (int i = 0; i < sys.N; ++i) {
    const auto& a = sc.agents[i];
    sys.x_off[i] = sys.nx;
    sys.nx += a.n();
    sys.z_off[i] = sys.nz;
    sys.z_dim[i] = comp ? a.n() + q_u : 0;
    sys.nz += sys.z_dim[i];

    auto& c = sys.cache[i];
    c.E = a.E();
    c.F = a.F();
    c.F_meas = a.F_meas();
    if (comp) {
      c.Abar = a.composite_A(sc.exo.S_u);
      c.Bbar = a.composite_B();
      c.Cbar = a.composite_C();
      c.Em = a.composite_E_m();
    }

    const auto& gn = law.gains.agents[i];
    if (gn.K1.rows() != a.m() || gn.K1.cols() != a.n())
      throw DimensionError("assemble: K1 shape mismatch for agent " +
                           std::to_string(i + 1));
    if (gn.K2u.cols() != q_u || (q_u > 0 && gn.K2u.rows() != a.m()))
      throw DimensionError("assemble: K2u shape mismatch for agent " +
                           std::to_string(i + 1));
    if (gn.K2m.cols() != q_m || (q_m > 0 && gn.K2m.rows() != a.m()))
      throw DimensionError("assemble: K2m shape mismatch for agent " +
                           std::to_string(i + 1));
    if (comp && (gn.L.rows() != a.n() + q_u || gn.L.cols() != a.p_m()))
      throw DimensionError("assemble: L shape mismatch for agent " +
                           std::to_string(i + 1));
  }

  if (uses_eta(law.kind)) {
    const auto pair = observers::estimated_pair(sc.exo, law.kind);
    sys.S_est = pair.S_est;
    sys.C_est = pair.C_est;
    sys.eta_tracks_full_v = pair.full_v;
    sys.d_eta = pair.S_est.rows();
    if (!law.gains.has_observer)
      throw PreconditionError(
          "assemble: distributed law requires distributed-observer gains");
    const auto& og = law.gains.observer;
    if (og.L0.rows() != sys.d_eta || og.L0.cols() != sys.C_est.rows())
      throw DimensionError("assemble: observer gain L0 shape mismatch");
    if (og.mu < 0.0)
      throw PreconditionError("assemble: coupling gain mu must be nonnegative");
  }
  return sys;
}

namespace {

struct Recorder {
  Trajectory tr;
  const ClosedLoopSystem* sys;

  explicit Recorder(const ClosedLoopSystem& s) : sys(&s) {
    const auto n = static_cast<std::size_t>(s.N);
    tr.x.resize(n);
    tr.z.resize(n);
    tr.eta.resize(n);
    tr.u.resize(n);
    tr.e.resize(n);
    tr.exo_S = s.S_exo;
  }

  void sample(double t, const Vector& y) {
    tr.times.push_back(t);
    tr.graph_index.push_back(sys->sc.schedule.active_index(t));
    tr.v.push_back(sys->exo_v(y));
    for (int i = 0; i < sys->N; ++i) {
      tr.x[i].push_back(sys->agent_x(y, i));
      tr.z[i].push_back(sys->agent_z(y, i));
      tr.eta[i].push_back(sys->d_eta > 0 ? sys->agent_eta(y, i) : Vector(0));
      tr.u[i].push_back(sys->agent_input(y, i));
      tr.e[i].push_back(sys->agent_error(y, i));
    }
  }
};

// Shared segment walker: fixed nominal step, shrunk per segment so switching
// instants land exactly on the grid.
template <typename Field, typename Sample>
int walk_segments(const topology::SwitchingSchedule& schedule, double horizon,
                  double step, Vector& y, const Field& field,
                  const Sample& sample) {
  int refined = 0;
  const auto segs = schedule.segments(horizon);
  sample(0.0, y, segs.front().graph);
  for (const auto& seg : segs) {
    const double len = seg.t1 - seg.t0;
    if (len <= 1e-15) continue;
    const auto steps =
        std::max<long>(1, static_cast<long>(std::ceil(len / step - 1e-9)));
    const double h = len / static_cast<double>(steps);
    if (std::abs(h - step) > 1e-12 * step) ++refined;
    for (long k = 1; k <= steps; ++k) {
      const double t0 = seg.t0 + static_cast<double>(k - 1) * h;
      const double t1 = (k == steps) ? seg.t1 : seg.t0 + static_cast<double>(k) * h;
      field(y, t0, h, seg.graph);
      guard_state(y, t1);
      sample(t1, y, seg.graph);
    }
  }
  return refined;
}

}  // namespace

Trajectory integrate(const ClosedLoopSystem& sys, double horizon, double step,
                     const std::optional<Vector>& y0) {
  if (horizon <= 0.0) throw ValidationError("integrate: horizon must be positive");
  if (step <= 0.0) throw ValidationError("integrate: step must be positive");
  Vector y = y0 ? *y0 : sys.initial_state();
  if (y.size() != sys.total_dim())
    throw DimensionError("integrate: initial state has wrong dimension");

  Recorder rec(sys);
  rec.tr.refined_intervals = walk_segments(
      sys.sc.schedule, horizon, step, y,
      [&](Vector& s, double, double h, int graph) {
        rk4_step(s, h, [&](const Vector& w) { return sys.derivative(w, graph); });
      },
      [&](double t, const Vector& s, int) { rec.sample(t, s); });
  return rec.tr;
}

namespace {

Vector eta_initial(const plantmodel::Scenario& sc, int follower,
                   Eigen::Index dim) {
  if (sc.eta0.empty()) return Vector::Zero(dim);
  const Vector& v = sc.eta0[static_cast<std::size_t>(follower)];
  if (v.size() != dim)
    throw DimensionError("scenario eta0: estimate dimension mismatch");
  return v;
}

Trajectory observer_study_discrete(const plantmodel::Scenario& sc,
                                   const synthesis::GainSet& gains) {
  const auto pair = observers::estimated_pair(sc.exo, sc.law.kind);
  const int N = sc.follower_count();
  auto bank = observers::make_bank(pair.S_est, pair.C_est, gains.observer, N);
  for (int i = 0; i < N; ++i) bank.eta[i] = eta_initial(sc, i, bank.dim());

  Trajectory tr;
  tr.exo_S = pair.S_est;
  tr.eta.resize(static_cast<std::size_t>(N));
  Vector v = sc.exo.v0();
  const Matrix S = sc.exo.S();
  const auto steps = static_cast<long>(std::llround(sc.horizon));
  if (steps < 1)
    throw ValidationError("observer study: discrete horizon must be >= 1 step");
  auto sample = [&](long t) {
    tr.times.push_back(static_cast<double>(t));
    tr.graph_index.push_back(sc.schedule.active_index(static_cast<double>(t)));
    tr.v.push_back(v);
    for (int i = 0; i < N; ++i) tr.eta[i].push_back(bank.eta[i]);
  };
  sample(0);
  for (long t = 0; t < steps; ++t) {
    const auto& g =
        sc.schedule.graphs[static_cast<std::size_t>(sc.schedule.active_index(static_cast<double>(t)))];
    observers::step_discrete(bank, v, g);
    v = S * v;
    guard_state(v, static_cast<double>(t + 1));
    for (const auto& eta : bank.eta) guard_state(eta, static_cast<double>(t + 1));
    sample(t + 1);
  }
  return tr;
}

Trajectory observer_study_adaptive(const plantmodel::Scenario& sc,
                                   const synthesis::GainSet& gains) {
  const int N = sc.follower_count();
  const Matrix S = sc.exo.S();
  const Eigen::Index d = S.rows();
  const double mu1 = gains.observer.mu1;
  const double mu2 = gains.observer.mu2;

  // Packed state [vec(S_hat_1..N); eta_1..N; v].
  const Eigen::Index mat_len = d * d;
  const Eigen::Index dim = N * mat_len + N * d + d;
  Vector y = Vector::Zero(dim);
  for (int i = 0; i < N; ++i)
    y.segment(N * mat_len + i * d, d) = eta_initial(sc, i, d);
  y.tail(d) = sc.exo.v0();

  auto shat = [&](const Vector& s, int i) {
    return Matrix(Eigen::Map<const Matrix>(s.data() + i * mat_len, d, d));
  };
  auto eta = [&](const Vector& s, int i) {
    return Vector(s.segment(N * mat_len + i * d, d));
  };

  auto field = [&](const Vector& s, int graph) {
    const auto& g = sc.schedule.graphs[static_cast<std::size_t>(graph)];
    const Vector v = s.tail(d);
    Vector ds(dim);
    ds.tail(d) = S * v;
    for (int i = 0; i < N; ++i) {
      Matrix dS = Matrix::Zero(d, d);
      Vector de = shat(s, i) * eta(s, i);
      for (int j = 0; j <= N; ++j) {
        const double w = g.adjacency(i + 1, j);
        if (w <= 0.0) continue;
        const Matrix Sj = (j == 0) ? S : shat(s, j - 1);
        const Vector ej = (j == 0) ? v : eta(s, j - 1);
        dS += (mu1 * w) * (Sj - shat(s, i));
        de += (mu2 * w) * (ej - eta(s, i));
      }
      Eigen::Map<Matrix>(ds.data() + i * mat_len, d, d) = dS;
      ds.segment(N * mat_len + i * d, d) = de;
    }
    return ds;
  };

  Trajectory tr;
  tr.exo_S = S;
  tr.eta.resize(static_cast<std::size_t>(N));
  tr.s_hat.resize(static_cast<std::size_t>(N));
  auto sample = [&](double t, const Vector& s, int) {
    tr.times.push_back(t);
    tr.graph_index.push_back(sc.schedule.active_index(t));
    tr.v.push_back(s.tail(d));
    for (int i = 0; i < N; ++i) {
      tr.eta[i].push_back(eta(s, i));
      tr.s_hat[i].push_back(shat(s, i));
    }
  };
  tr.refined_intervals = walk_segments(
      sc.schedule, sc.horizon, sc.step, y,
      [&](Vector& s, double, double h, int graph) {
        rk4_step(s, h, [&](const Vector& w) { return field(w, graph); });
      },
      sample);
  return tr;
}

Trajectory observer_study_sync_ref(const plantmodel::Scenario& sc,
                                   const synthesis::GainSet& gains) {
  const auto pair = observers::estimated_pair(sc.exo, sc.law.kind);
  const Matrix& S = pair.S_est;
  const Matrix& C = pair.C_est;
  const double mu = gains.observer.mu;
  const Matrix& L0 = gains.observer.L0;
  const int N = sc.follower_count();
  const Eigen::Index d = S.rows();

  // Packed state [eta_1..N; v]; v rides along only for reporting.
  Vector y = Vector::Zero(N * d + d);
  for (int i = 0; i < N; ++i) y.segment(i * d, d) = eta_initial(sc, i, d);
  y.tail(d) = sc.exo.v0();

  auto field = [&](const Vector& s, int graph) {
    const auto& g = sc.schedule.graphs[static_cast<std::size_t>(graph)];
    Vector ds(s.size());
    ds.tail(d) = S * s.tail(d);
    for (int i = 0; i < N; ++i) {
      const Vector eta_i = s.segment(i * d, d);
      Vector acc = Vector::Zero(d);
      for (int j = 1; j <= N; ++j) {  // leaderless: follower edges only
        const double w = g.adjacency(i + 1, j);
        if (w <= 0.0) continue;
        acc += w * (s.segment((j - 1) * d, d) - eta_i);
      }
      ds.segment(i * d, d) = S * eta_i + mu * (L0 * (C * acc));
    }
    return ds;
  };

  Trajectory tr;
  tr.exo_S = S;
  tr.eta.resize(static_cast<std::size_t>(N));
  auto sample = [&](double t, const Vector& s, int) {
    tr.times.push_back(t);
    tr.graph_index.push_back(sc.schedule.active_index(t));
    tr.v.push_back(s.tail(d));
    for (int i = 0; i < N; ++i) tr.eta[i].push_back(s.segment(i * d, d));
  };
  tr.refined_intervals = walk_segments(
      sc.schedule, sc.horizon, sc.step, y,
      [&](Vector& s, double, double h, int graph) {
        rk4_step(s, h, [&](const Vector& w) { return field(w, graph); });
      },
      sample);
  return tr;
}

}  // namespace

Trajectory simulate_observer_study(const plantmodel::Scenario& sc,
                                   const synthesis::GainSet& gains) {
  sc.validate();
  switch (sc.law.kind) {
    case LawKind::discrete_observer:
      return observer_study_discrete(sc, gains);
    case LawKind::adaptive_observer:
      return observer_study_adaptive(sc, gains);
    case LawKind::sync_ref:
      return observer_study_sync_ref(sc, gains);
    default:
      throw PreconditionError(
          "observer study: law kind is a closed-loop law; use assemble/integrate");
  }
}

MetricsSummary metrics(const Trajectory& tr, double threshold,
                       const synthesis::GainSet* gains) {
  if (tr.times.empty()) throw PreconditionError("metrics: empty trajectory");
  const std::size_t K = tr.times.size();
  MetricsSummary out;
  const double span = tr.times.back() - tr.times.front();
  out.window_start = tr.times.back() - 0.1 * span;
  std::size_t w0 = K - 1;
  while (w0 > 0 && tr.times[w0 - 1] >= out.window_start - 1e-12) --w0;

  const int N = tr.agent_count();
  out.agents.resize(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    auto& m = out.agents[static_cast<std::size_t>(i)];
    const bool has_e =
        i < static_cast<int>(tr.e.size()) && !tr.e[i].empty() && tr.e[i][0].size() > 0;
    if (has_e) {
      for (std::size_t k = w0; k < K; ++k)
        m.final_max_error =
            std::max(m.final_max_error, tr.e[i][k].lpNorm<Eigen::Infinity>());
      std::size_t k = K;
      while (k > 0 && tr.e[i][k - 1].lpNorm<Eigen::Infinity>() <= threshold) --k;
      if (k < K) m.convergence_time = tr.times[k];
    } else {
      m.convergence_time = 0.0;
    }

    const bool has_eta = i < static_cast<int>(tr.eta.size()) &&
                         !tr.eta[i].empty() && tr.eta[i][0].size() > 0;
    if (has_eta) {
      const Eigen::Index d = tr.eta[i][0].size();
      for (std::size_t k = w0; k < K; ++k) {
        const Vector target =
            (d == tr.v[k].size()) ? tr.v[k] : Vector(tr.v[k].tail(d));
        m.final_max_observer_error =
            std::max(m.final_max_observer_error, (tr.eta[i][k] - target).norm());
      }
    }

    if (i < static_cast<int>(tr.s_hat.size()) && !tr.s_hat[i].empty()) {
      for (std::size_t k = w0; k < K; ++k)
        m.final_max_generator_error = std::max(
            m.final_max_generator_error, (tr.s_hat[i][k] - tr.exo_S).norm());
    }

    if (gains && i < static_cast<int>(gains->agents.size()) &&
        i < static_cast<int>(tr.x.size()) && !tr.x[i].empty()) {
      const auto& G = gains->agents[static_cast<std::size_t>(i)];
      if (G.X.size() > 0)
        m.steady_x_residual = (tr.x[i].back() - G.X * tr.v.back()).norm();
      if (G.U.size() > 0 && !tr.u[i].empty())
        m.steady_u_residual = (tr.u[i].back() - G.U * tr.v.back()).norm();
    }

    out.max_final_error = std::max(out.max_final_error, m.final_max_error);
    out.max_final_observer_error =
        std::max(out.max_final_observer_error, m.final_max_observer_error);
    out.max_final_generator_error =
        std::max(out.max_final_generator_error, m.final_max_generator_error);
  }
  return out;
}

namespace {

// Columns of the closed-loop maps by probing the (linear) vector field with
// unit vectors; exact since no finite differencing is involved.
void closed_loop_matrices(const ClosedLoopSystem& sys, Matrix& Ac, Matrix& Bc,
                          Matrix& Cc, Matrix& Dc) {
  const Eigen::Index D = sys.state_dim();
  const Eigen::Index q = sys.q;
  Eigen::Index P = 0;
  for (const auto& a : sys.sc.agents) P += a.p();
  const int graph = sys.sc.schedule.active_index(0.0);

  Ac.resize(D, D);
  Bc.resize(D, q);
  Cc.resize(P, D);
  Dc.resize(P, q);
  Vector y = Vector::Zero(sys.total_dim());
  auto probe = [&](Eigen::Index col, bool state_col) {
    const Vector dy = sys.derivative(y, graph);
    Vector err(P);
    Eigen::Index at = 0;
    for (int i = 0; i < sys.N; ++i) {
      const Vector e = sys.agent_error(y, i);
      err.segment(at, e.size()) = e;
      at += e.size();
    }
    if (state_col) {
      Ac.col(col) = dy.head(D);
      Cc.col(col) = err;
    } else {
      Bc.col(col) = dy.head(D);
      Dc.col(col) = err;
    }
  };
  for (Eigen::Index j = 0; j < D; ++j) {
    y.setZero();
    y(j) = 1.0;
    probe(j, true);
  }
  for (Eigen::Index j = 0; j < q; ++j) {
    y.setZero();
    y(D + j) = 1.0;
    probe(j, false);
  }
}

}  // namespace

SeparationReport verify_separation(const ClosedLoopSystem& sys,
                                   double tolerance) {
  if (!sys.sc.schedule.is_static())
    throw PreconditionError(
        "verify_separation: requires a static communication topology");

  Matrix Ac, Bc, Cc, Dc;
  closed_loop_matrices(sys, Ac, Bc, Cc, Dc);

  SeparationReport rep;
  rep.closed_loop = numkit::spectrum(Ac).values;

  for (int i = 0; i < sys.N; ++i) {
    const auto& a = sys.sc.agents[i];
    const auto& gn = sys.law.gains.agents[i];
    const auto fb = numkit::spectrum(a.A + a.B * gn.K1).values;
    rep.predicted.insert(rep.predicted.end(), fb.begin(), fb.end());
    if (sys.z_dim[i] > 0) {
      const Matrix A_L = sys.cache[i].Abar - gn.L * sys.cache[i].Cbar;
      const auto ob = numkit::spectrum(A_L).values;
      rep.predicted.insert(rep.predicted.end(), ob.begin(), ob.end());
    }
  }
  if (sys.d_eta > 0) {
    const int graph = sys.sc.schedule.active_index(0.0);
    const Matrix M = observers::error_matrix(
        sys.S_est, sys.C_est, sys.law.gains.observer.L0,
        sys.law.gains.observer.mu,
        sys.sc.schedule.graphs[static_cast<std::size_t>(graph)]);
    const auto om = numkit::spectrum(M).values;
    rep.predicted.insert(rep.predicted.end(), om.begin(), om.end());
  }

  // Greedy multiset match.
  if (rep.predicted.size() != rep.closed_loop.size()) {
    rep.pass = false;
    rep.max_mismatch = std::numeric_limits<double>::infinity();
    return rep;
  }
  std::vector<bool> used(rep.predicted.size(), false);
  for (const Complex& lam : rep.closed_loop) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < rep.predicted.size(); ++j) {
      if (used[j]) continue;
      const double dist = std::abs(lam - rep.predicted[j]);
      if (dist < best) {
        best = dist;
        best_j = j;
      }
    }
    used[best_j] = true;
    rep.max_mismatch = std::max(rep.max_mismatch, best);
  }
  rep.pass = rep.max_mismatch <= tolerance;
  return rep;
}

SylvesterReport verify_sylvester_steady_state(const ClosedLoopSystem& sys) {
  Matrix Ac, Bc, Cc, Dc;
  closed_loop_matrices(sys, Ac, Bc, Cc, Dc);

  const auto ac_eigs = numkit::spectrum(Ac).values;
  const auto s_eigs = numkit::spectrum(sys.S_exo).values;
  for (const Complex& a : ac_eigs)
    for (const Complex& s : s_eigs)
      if (std::abs(a - s) <= 1e-7)
        throw PreconditionError(
            "steady-state check: closed-loop and exosystem spectra overlap");

  const Eigen::Index D = Ac.rows();
  numkit::MatrixEquation eq;
  eq.terms.push_back({0, Matrix::Identity(D, D), sys.S_exo});
  eq.terms.push_back({0, Matrix(-Ac), Matrix::Identity(sys.q, sys.q)});
  eq.rhs = Bc;
  const auto sol = numkit::solve_linear_matrix_system({eq}, {{D, sys.q}});

  SylvesterReport rep;
  rep.Xc = sol.unknowns[0];
  rep.residual = (Cc * rep.Xc + Dc).norm();
  return rep;
}

bool input_decay_check(const Matrix& A, const observers::Signal& forcing,
                       const Vector& x0, double horizon, double step,
                       double threshold) {
  if (A.rows() != A.cols() || x0.size() != A.rows())
    throw DimensionError("input_decay_check: dimension mismatch");
  if (horizon <= 0.0 || step <= 0.0)
    throw ValidationError("input_decay_check: horizon and step must be positive");
  const auto steps =
      std::max<long>(1, static_cast<long>(std::ceil(horizon / step - 1e-9)));
  const double h = horizon / static_cast<double>(steps);
  Vector x = x0;
  auto f = [&](const Vector& s, double t) { return Vector(A * s + forcing(t)); };
  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * h;
    const Vector k1 = f(x, t);
    const Vector k2 = f(x + (0.5 * h) * k1, t + 0.5 * h);
    const Vector k3 = f(x + (0.5 * h) * k2, t + 0.5 * h);
    const Vector k4 = f(x + h * k3, t + h);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    guard_state(x, t + h);
  }
  return x.norm() <= threshold;
}

namespace {

void put_number(std::string& row, double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  row += buf;
}

void put_vector(std::string& row, const Vector& v, Eigen::Index width) {
  for (Eigen::Index j = 0; j < width; ++j) {
    row += ',';
    if (j < v.size()) put_number(row, v(j));
  }
}

}  // namespace

void write_trajectory_csv(const Trajectory& tr, std::ostream& os) {
  const int N = tr.agent_count();
  const std::size_t K = tr.times.size();
  auto width_of = [&](const std::vector<std::vector<Vector>>& sig) {
    Eigen::Index w = 0;
    for (const auto& agent : sig)
      if (!agent.empty()) w = std::max(w, agent.front().size());
    return w;
  };
  Eigen::Index wx = width_of(tr.x);
  if (!tr.v.empty()) wx = std::max(wx, tr.v.front().size());
  const Eigen::Index wz = width_of(tr.z);
  const Eigen::Index weta = width_of(tr.eta);
  const Eigen::Index wu = width_of(tr.u);
  const Eigen::Index we = width_of(tr.e);

  std::string header = "t,agent,graph_index";
  auto label = [&](const char* base, Eigen::Index w) {
    for (Eigen::Index j = 0; j < w; ++j)
      header += "," + std::string(base) + std::to_string(j);
  };
  label("x", wx);
  label("z", wz);
  label("eta", weta);
  label("u", wu);
  label("e", we);
  os << header << '\n';

  std::string row;
  auto fetch = [&](const std::vector<std::vector<Vector>>& sig, int i,
                   std::size_t k) {
    if (i < static_cast<int>(sig.size()) && k < sig[i].size())
      return sig[static_cast<std::size_t>(i)][k];
    return Vector(0);
  };
  for (std::size_t k = 0; k < K; ++k) {
    // Exosystem row: agent id 0, v in the x columns.
    row.clear();
    put_number(row, tr.times[k]);
    row += ",0,";
    row += std::to_string(tr.graph_index[k]);
    put_vector(row, tr.v[k], wx);
    put_vector(row, Vector(0), wz + weta + wu + we);
    os << row << '\n';
    for (int i = 0; i < N; ++i) {
      row.clear();
      put_number(row, tr.times[k]);
      row += ',';
      row += std::to_string(i + 1);
      row += ',';
      row += std::to_string(tr.graph_index[k]);
      put_vector(row, fetch(tr.x, i, k), wx);
      put_vector(row, fetch(tr.z, i, k), wz);
      put_vector(row, fetch(tr.eta, i, k), weta);
      put_vector(row, fetch(tr.u, i, k), wu);
      put_vector(row, fetch(tr.e, i, k), we);
      os << row << '\n';
    }
  }
}

}  // namespace coopreg::simkit
