#include "coopreg/synthesis.hpp"

#include "coopreg/numkit.hpp"

#include <sstream>

namespace coopreg::synthesis {

using plantmodel::LawKind;
using plantmodel::PlantAgent;
using plantmodel::Scenario;

RegulatorSolution solve_regulator(const PlantAgent& agent, const Matrix& S,
                                  bool allow_residual) {
  if (S.rows() != S.cols()) throw DimensionError("solve_regulator: S not square");
  const auto n = agent.n(), m = agent.m(), q = S.rows();
  const Matrix E = agent.E(), F = agent.F();
  if (E.cols() != q || F.cols() != q)
    throw DimensionError("solve_regulator: exosystem dimension mismatch");

  const Matrix I_n = Matrix::Identity(n, n);
  const Matrix I_q = Matrix::Identity(q, q);

  // X S - A X - B U = E ;  C X + D U = -F
  std::vector<numkit::MatrixEquation> eqs(2);
  eqs[0].terms = {{0, I_n, S}, {0, Matrix(-agent.A), I_q}, {1, Matrix(-agent.B), I_q}};
  eqs[0].rhs = E;
  eqs[1].terms = {{0, agent.C, I_q}, {1, agent.D, I_q}};
  eqs[1].rhs = -F;

  numkit::MatrixSystemSolution sol;
  try {
    sol = numkit::solve_linear_matrix_system(eqs, {{n, q}, {m, q}},
                                             allow_residual);
  } catch (const UnsolvableError& e) {
    throw UnsolvableError("regulator equations: inconsistent (residual " +
                              std::to_string(e.residual) + ")",
                          e.residual);
  }
  return {sol.unknowns[0], sol.unknowns[1], sol.residual, sol.exact};
}

std::vector<Complex> RankConditionReport::failures() const {
  std::vector<Complex> out;
  for (const auto& e : entries)
    if (!e.pass) out.push_back(e.lambda);
  return out;
}

RankConditionReport check_rank_condition(const PlantAgent& agent,
                                         const Matrix& S) {
  const auto n = agent.n(), m = agent.m(), p = agent.p();
  RankConditionReport report;
  for (const auto& group : numkit::spectrum(S).groups) {
    ComplexMatrix pencil(n + p, n + m);
    pencil.setZero();
    pencil.topLeftCorner(n, n) = agent.A.cast<Complex>();
    pencil.topLeftCorner(n, n).diagonal().array() -= group.value;
    pencil.topRightCorner(n, m) = agent.B.cast<Complex>();
    pencil.bottomLeftCorner(p, n) = agent.C.cast<Complex>();
    pencil.bottomRightCorner(p, m) = agent.D.cast<Complex>();
    RankConditionEntry entry{group.value, numkit::rank(pencil), n + p, false};
    entry.pass = entry.rank == entry.required;
    report.all_pass = report.all_pass && entry.pass;
    report.entries.push_back(entry);
  }
  return report;
}

Matrix design_feedback(const PlantAgent& agent) {
  const Matrix P = numkit::solve_are(agent.A, agent.B);
  return -agent.B.transpose() * P;
}

Matrix feedforward(const Matrix& X, const Matrix& U, const Matrix& K1) {
  if (K1.cols() != X.rows() || U.cols() != X.cols() || U.rows() != K1.rows())
    throw DimensionError("feedforward: shape mismatch");
  return U - K1 * X;
}

LuenbergerDesign design_luenberger(const PlantAgent& agent,
                                   const Matrix& S_u) {
  const Matrix Abar = agent.composite_A(S_u);
  const Matrix Cbar = agent.composite_C();
  if (Cbar.rows() == 0)
    throw SynthesisError("luenberger: agent has no measured output");
  if (!numkit::pbh_detectable(Abar, Cbar))
    throw SynthesisError(
        "luenberger: composite detectability failed for (Cbar, Abar)");
  const Matrix P = numkit::solve_are(Abar.transpose(), Cbar.transpose());
  LuenbergerDesign d;
  d.L = P * Cbar.transpose();
  d.A_L = Abar - d.L * Cbar;
  if (!numkit::is_hurwitz(d.A_L))
    throw NumericError("luenberger: injected dynamics not Hurwitz");
  return d;
}

namespace {

std::string rank_failure_message(const RankConditionReport& report,
                                 std::size_t agent_index) {
  std::ostringstream os;
  os << "agent " << (agent_index + 1)
     << ": rank condition failed at exosystem mode";
  for (const auto& l : report.failures())
    os << " (" << l.real() << (l.imag() < 0 ? "" : "+") << l.imag() << "i)";
  return os.str();
}

bool needs_compensator(LawKind kind) {
  switch (kind) {
    case LawKind::decentralized_measurement:
    case LawKind::distributed_measurement:
    case LawKind::special_vm_only:
    case LawKind::special_vu_only:
      return true;
    default:
      return false;
  }
}

bool needs_observer(LawKind kind) {
  switch (kind) {
    case LawKind::distributed_full_info:
    case LawKind::distributed_measurement:
    case LawKind::special_vm_only:
    case LawKind::discrete_observer:
    case LawKind::adaptive_observer:
    case LawKind::sync_ref:
      return true;
    default:
      return false;
  }
}

bool is_identity(const Matrix& M) {
  return M.rows() == M.cols() &&
         M.isApprox(Matrix::Identity(M.rows(), M.cols()), 1e-12);
}

observers::ObserverGains design_observer_gains(const Scenario& sc) {
  const auto est = observers::estimated_pair(sc.exo, sc.law.kind);
  const auto& sched = sc.schedule;

  if (sc.law.kind == LawKind::discrete_observer)
    return observers::design_gain_discrete(est.S_est, est.C_est, sched.graphs);

  if (sc.law.kind == LawKind::adaptive_observer) {
    observers::ObserverGains g;
    g.mu1 = g.mu2 = sc.law.mu.value_or(1.0);
    g.mu = g.mu2;
    g.L0 = Matrix::Identity(est.S_est.rows(), est.S_est.rows());
    g.rule = "adaptive-consensus";
    return g;
  }

  if (sc.law.kind == LawKind::sync_ref) {
    auto g = observers::design_gain_switching_undirected(est.S_est, est.C_est);
    g.rule = "marginal-lyapunov sync-ref";
    return g;
  }

  if (sched.is_static()) {
    const auto& graph = sched.graphs[sched.active.empty() ? 0 : sched.active[0]];
    const double delta = topology::min_real_eig_h(topology::h_matrix(graph));
    auto g = observers::design_gain_static(est.S_est, est.C_est, delta);
    // a-posteriori certificate on the actual error system
    if (!numkit::is_hurwitz(
            observers::error_matrix(est.S_est, est.C_est, g.L0, g.mu, graph)))
      throw SynthesisError(
          "observer gain: static-rule error system failed the stability "
          "check");
    return g;
  }

  bool all_undirected = true;
  for (const auto& g : sched.graphs) all_undirected &= g.undirected;
  if (all_undirected)
    return observers::design_gain_switching_undirected(est.S_est, est.C_est);

  if (is_identity(est.C_est)) {
    observers::ObserverGains g;
    g.mu = sc.law.mu.value_or(1.0);
    g.L0 = Matrix::Identity(est.S_est.rows(), est.S_est.rows());
    g.rule = "identity-output switching (uncertified)";
    return g;
  }
  throw SynthesisError(
      "observer gain: no certified rule for directed switching graphs with a "
      "general leader output");
}

}  // namespace

GainSet synthesize(const Scenario& sc) {
  sc.validate();
  GainSet out;

  if (plantmodel::law_is_closed_loop(sc.law.kind)) {
    const Matrix S = sc.exo.S();
    const auto q_u = sc.exo.q_u();
    for (std::size_t i = 0; i < sc.agents.size(); ++i) {
      const auto& agent = sc.agents[i];
      const auto rank = check_rank_condition(agent, S);
      if (!rank.all_pass)
        throw SynthesisError(rank_failure_message(rank, i));

      AgentGains g;
      const auto reg = solve_regulator(agent, S);
      g.X = reg.X;
      g.U = reg.U;
      g.K1 = design_feedback(agent);
      const Matrix K2 = feedforward(g.X, g.U, g.K1);
      g.K2u = K2.leftCols(q_u);
      g.K2m = K2.rightCols(sc.exo.q_m());
      if (needs_compensator(sc.law.kind))
        g.L = design_luenberger(agent, sc.exo.S_u).L;
      out.agents.push_back(std::move(g));
    }
  }

  if (needs_observer(sc.law.kind)) {
    out.observer = design_observer_gains(sc);
    out.has_observer = true;
    if (sc.law.mu && sc.law.kind != LawKind::adaptive_observer) {
      out.observer.mu = *sc.law.mu;
      out.observer.rule += " (mu override)";
    }
  }
  return out;
}

SolvabilityReport solvability_report(const Scenario& sc) {
  SolvabilityReport report;
  const Matrix S = sc.exo.S();
  for (const auto& agent : sc.agents) {
    SolvabilityEntry entry;
    entry.rank = check_rank_condition(agent, S);
    entry.regulator = solve_regulator(agent, S, /*allow_residual=*/true);
    report.all_exact =
        report.all_exact && entry.rank.all_pass && entry.regulator.exact;
    report.agents.push_back(std::move(entry));
  }
  return report;
}

}  // namespace coopreg::synthesis
