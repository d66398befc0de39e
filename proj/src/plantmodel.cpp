#include "coopreg/plantmodel.hpp"

#include "coopreg/numkit.hpp"
#include "coopreg/synthesis.hpp"

#include <cmath>
#include <sstream>

namespace coopreg::plantmodel {

Matrix Exosystem::S() const {
  Matrix out = Matrix::Zero(q(), q());
  out.topLeftCorner(q_u(), q_u()) = S_u;
  out.bottomRightCorner(q_m(), q_m()) = S_m;
  return out;
}

Matrix Exosystem::C0() const {
  Matrix out = Matrix::Zero(p0(), q());
  out.rightCols(q_m()) = C_m0;
  return out;
}

Vector Exosystem::v0() const {
  Vector out(q());
  out.head(q_u()) = v0_u;
  out.tail(q_m()) = v0_m;
  return out;
}

void Exosystem::validate() const {
  if (S_u.rows() != S_u.cols()) throw ValidationError("exosystem: S_u not square");
  if (S_m.rows() != S_m.cols()) throw ValidationError("exosystem: S_m not square");
  if (q() == 0) throw ValidationError("exosystem: empty generator");
  if (C_m0.cols() != q_m())
    throw ValidationError("exosystem: C_m0 column count must match dim(v_m)");
  if (v0_u.size() != q_u() || v0_m.size() != q_m())
    throw ValidationError("exosystem: initial state size mismatch");
}

bool Exosystem::spectrum_has_no_decaying_modes() const {
  for (const auto& v : numkit::spectrum(S()).values)
    if (v.real() < -numkit::kSpectrumTol) return false;
  return true;
}

Matrix PlantAgent::E() const {
  Matrix out(n(), E_u.cols() + E_m.cols());
  out << E_u, E_m;
  return out;
}

Matrix PlantAgent::F() const {
  Matrix out(p(), F_u.cols() + F_m.cols());
  out << F_u, F_m;
  return out;
}

Matrix PlantAgent::F_meas() const {
  Matrix out(p_m(), F_mu.cols() + F_mm.cols());
  out << F_mu, F_mm;
  return out;
}

Matrix PlantAgent::composite_A(const Matrix& S_u) const {
  const auto qu = S_u.rows();
  Matrix out = Matrix::Zero(n() + qu, n() + qu);
  out.topLeftCorner(n(), n()) = A;
  out.topRightCorner(n(), qu) = E_u;
  out.bottomRightCorner(qu, qu) = S_u;
  return out;
}

Matrix PlantAgent::composite_B() const {
  Matrix out = Matrix::Zero(n() + E_u.cols(), m());
  out.topRows(n()) = B;
  return out;
}

Matrix PlantAgent::composite_C() const {
  Matrix out(p_m(), n() + F_mu.cols());
  out << C_m, F_mu;
  return out;
}

Matrix PlantAgent::composite_E_m() const {
  Matrix out = Matrix::Zero(n() + E_u.cols(), E_m.cols());
  out.topRows(n()) = E_m;
  return out;
}

void PlantAgent::validate(Eigen::Index q_u, Eigen::Index q_m) const {
  if (A.rows() != A.cols()) throw ValidationError("agent: A not square");
  const auto nn = n();
  if (B.rows() != nn) throw ValidationError("agent: B row count");
  if (C.cols() != nn) throw ValidationError("agent: C column count");
  if (D.rows() != p() || D.cols() != m())
    throw ValidationError("agent: D shape");
  if (E_u.rows() != nn || E_u.cols() != q_u)
    throw ValidationError("agent: E_u shape");
  if (E_m.rows() != nn || E_m.cols() != q_m)
    throw ValidationError("agent: E_m shape");
  if (F_u.rows() != p() || F_u.cols() != q_u)
    throw ValidationError("agent: F_u shape");
  if (F_m.rows() != p() || F_m.cols() != q_m)
    throw ValidationError("agent: F_m shape");
  if (C_m.cols() != nn) throw ValidationError("agent: C_m column count");
  if (D_m.rows() != p_m() || D_m.cols() != m())
    throw ValidationError("agent: D_m shape");
  if (F_mu.rows() != p_m() || F_mu.cols() != q_u)
    throw ValidationError("agent: F_mu shape");
  if (F_mm.rows() != p_m() || F_mm.cols() != q_m)
    throw ValidationError("agent: F_mm shape");
  if (x0.size() != nn) throw ValidationError("agent: x0 size");
}

bool law_is_closed_loop(LawKind kind) {
  switch (kind) {
    case LawKind::discrete_observer:
    case LawKind::adaptive_observer:
    case LawKind::sync_ref:
      return false;
    default:
      return true;
  }
}

void Scenario::validate() const {
  exo.validate();
  schedule.validate();
  if (law_is_closed_loop(law.kind)) {
    if (agents.empty())
      throw ValidationError("scenario: closed-loop law but no agents");
    if (static_cast<int>(agents.size()) != follower_count())
      throw ValidationError(
          "scenario: topology node count must equal agent count + 1");
  }
  for (const auto& a : agents) a.validate(exo.q_u(), exo.q_m());
  if (step <= 0.0) throw ValidationError("scenario: step must be positive");
  if (law.kind == LawKind::special_vm_only && exo.q_u() != 0)
    throw ValidationError("scenario: special_vm_only requires dim(v_u) = 0");
  if (law.kind == LawKind::special_vu_only && exo.q_m() != 0)
    throw ValidationError("scenario: special_vu_only requires dim(v_m) = 0");
  if (law.mu && *law.mu < 0.0)
    throw ValidationError("scenario: coupling gain override must be >= 0");
  if (!eta0.empty() &&
      static_cast<int>(eta0.size()) != follower_count())
    throw ValidationError(
        "scenario: eta0 must list one initial estimate per follower");
}

namespace {

// Follower-to-follower connectivity for leaderless reference generators:
// some follower must reach all others through follower edges.
bool follower_spanning_tree(const topology::WeightedDigraph& g) {
  const int n = g.node_count();
  for (int root = 1; root < n; ++root) {
    std::vector<bool> seen(n, false);
    std::vector<int> stack{root};
    seen[root] = true;
    int count = 1;
    while (!stack.empty()) {
      const int j = stack.back();
      stack.pop_back();
      for (int i = 1; i < n; ++i)
        if (!seen[i] && g.adjacency(i, j) > 0.0) {
          seen[i] = true;
          ++count;
          stack.push_back(i);
        }
    }
    if (count == n - 1) return true;
  }
  return false;
}

}  // namespace

bool AssumptionReport::all_pass() const {
  if (!topology_certified) return false;
  for (const auto& a : agents)
    if (!(a.stabilizable && a.composite_detectable && a.regulator_exact &&
          a.rank_condition))
      return false;
  return true;
}

std::string AssumptionReport::describe() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& a = agents[i];
    os << "agent " << (i + 1) << ": stabilizability "
       << (a.stabilizable ? "ok" : "FAILED") << ", composite detectability "
       << (a.composite_detectable ? "ok" : "FAILED") << ", rank condition "
       << (a.rank_condition ? "ok" : "FAILED");
    if (!a.rank_condition) {
      os << " at exosystem mode";
      for (const auto& l : a.rank_failures)
        os << " (" << l.real() << (l.imag() < 0 ? "" : "+") << l.imag() << "i)";
    }
    os << ", regulator equations "
       << (a.regulator_exact ? "ok" : "FAILED (residual ")
       << (a.regulator_exact ? "" : std::to_string(a.regulator_residual) + ")")
       << "\n";
  }
  os << "exosystem spectrum: "
     << (exo_no_decay ? "no decaying modes"
                      : "warning: decaying modes present (they drop out of "
                        "the steady state)")
     << "\n";
  os << "topology: " << topology_note << "\n";
  return os.str();
}

AssumptionReport validate_assumptions(const Scenario& sc) {
  sc.validate();
  AssumptionReport report;
  report.exo_no_decay = sc.exo.spectrum_has_no_decaying_modes();
  const Matrix S = sc.exo.S();

  for (const auto& agent : sc.agents) {
    AgentAssumptions a;
    a.stabilizable = numkit::pbh_stabilizable(agent.A, agent.B);
    a.composite_detectable = numkit::pbh_detectable(
        agent.composite_A(sc.exo.S_u), agent.composite_C());
    const auto rank_report = synthesis::check_rank_condition(agent, S);
    a.rank_condition = rank_report.all_pass;
    a.rank_failures = rank_report.failures();
    const auto reg = synthesis::solve_regulator(agent, S,
                                                /*allow_residual=*/true);
    a.regulator_exact = reg.exact;
    a.regulator_residual = reg.residual;
    report.agents.push_back(std::move(a));
  }

  const auto& sched = sc.schedule;
  if (sc.law.kind == LawKind::sync_ref) {
    const bool ok = follower_spanning_tree(sched.graphs.front());
    report.topology_certified = ok;
    report.topology_note =
        ok ? "follower graph has a spanning tree"
           : "FAILED: follower graph has no spanning tree";
  } else if (sched.is_static()) {
    const bool ok =
        topology::reachable_from_leader(sched.graphs[sched.active.front()]);
    report.topology_certified = ok;
    report.topology_note = ok
        ? "static graph: leader reaches every follower"
        : "FAILED: leader does not reach every follower";
  } else {
    const double horizon = sc.horizon > 0 ? sc.horizon : sched.effective_window();
    report.joint = topology::verify_jointly_connected(
        sched, horizon, sched.effective_window());
    report.topology_certified = report.joint.certified;
    std::ostringstream os;
    if (report.joint.certified)
      os << "joint connectivity certified over " << report.joint.windows_checked
         << " window(s) of length " << sched.effective_window();
    else
      os << "FAILED: joint connectivity not certified on window ["
         << report.joint.fail_t0 << ", " << report.joint.fail_t1 << ")";
    report.topology_note = os.str();
  }
  return report;
}

ContainmentModel build_containment(const ContainmentSpec& spec) {
  const auto l = spec.leader_S.size();
  if (l < 2) throw ValidationError("containment: need at least two leaders");
  if (spec.leader_v0.size() != l || spec.alpha.size() != static_cast<Eigen::Index>(l))
    throw ValidationError("containment: leader list / weight size mismatch");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < spec.alpha.size(); ++i) {
    if (spec.alpha(i) < 0.0)
      throw ValidationError("containment: weights must be nonnegative");
    sum += spec.alpha(i);
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw ValidationError("containment: weights must sum to one");

  const auto q0 = spec.leader_S.front().rows();
  for (std::size_t i = 0; i < l; ++i) {
    if (spec.leader_S[i].rows() != q0 || spec.leader_S[i].cols() != q0)
      throw ValidationError("containment: leader dimensions must agree");
    if (spec.leader_v0[i].size() != q0)
      throw ValidationError("containment: leader initial state size mismatch");
  }

  const auto q = static_cast<Eigen::Index>(l) * q0;
  ContainmentModel model;
  model.exo.S_m = Matrix::Zero(q, q);
  model.exo.v0_m = Vector(q);
  model.F2 = Matrix::Zero(q0, q);
  for (std::size_t i = 0; i < l; ++i) {
    const auto off = static_cast<Eigen::Index>(i) * q0;
    model.exo.S_m.block(off, off, q0, q0) = spec.leader_S[i];
    model.exo.v0_m.segment(off, q0) = spec.leader_v0[i];
    model.F2.middleCols(off, q0) =
        spec.alpha(static_cast<Eigen::Index>(i)) * Matrix::Identity(q0, q0);
  }
  model.exo.C_m0 = model.F2;  // leader broadcast is the reference r = F2 v
  model.exo.v0_u = Vector(0);
  return model;
}

PlantAgent apply_containment(const PlantAgent& agent, const Matrix& F1,
                             const ContainmentModel& model) {
  const auto q = model.exo.q_m();
  const auto q0 = model.F2.rows();
  if (agent.p() != q0)
    throw ValidationError(
        "containment: agent error dimension must match the reference");
  if (F1.rows() != agent.p() || F1.cols() != q)
    throw ValidationError("containment: F1 shape mismatch");
  PlantAgent out = agent;
  out.E_u = Matrix::Zero(agent.n(), 0);
  if (out.E_m.cols() != q) out.E_m = Matrix::Zero(agent.n(), q);
  out.F_u = Matrix::Zero(agent.p(), 0);
  out.F_m = F1 - model.F2;
  out.F_mu = Matrix::Zero(agent.p_m(), 0);
  if (out.F_mm.cols() != q) out.F_mm = Matrix::Zero(agent.p_m(), q);
  out.validate(0, q);
  return out;
}

LocalExoResult localize_exogenous(const std::vector<Matrix>& local_S,
                                  const std::vector<Vector>& local_v0,
                                  const std::vector<PlantAgent>& agents) {
  const auto N = agents.size();
  if (local_S.size() != N || local_v0.size() != N)
    throw ValidationError("localize: per-agent list sizes disagree");
  if (N == 0) throw ValidationError("localize: no agents");

  std::vector<Eigen::Index> offset(N + 1, 0);
  for (std::size_t i = 0; i < N; ++i) {
    if (local_S[i].rows() != local_S[i].cols())
      throw ValidationError("localize: local generator not square");
    if (local_v0[i].size() != local_S[i].rows())
      throw ValidationError("localize: local initial state size mismatch");
    offset[i + 1] = offset[i] + local_S[i].rows();
  }
  const auto q = offset.back();

  LocalExoResult out;
  out.exo.S_m = Matrix::Zero(q, q);
  out.exo.v0_m = Vector(q);
  out.exo.C_m0 = Matrix::Identity(q, q);
  out.exo.v0_u = Vector(0);
  for (std::size_t i = 0; i < N; ++i) {
    out.exo.S_m.block(offset[i], offset[i], local_S[i].rows(),
                      local_S[i].rows()) = local_S[i];
    out.exo.v0_m.segment(offset[i], local_v0[i].size()) = local_v0[i];
  }

  for (std::size_t i = 0; i < N; ++i) {
    const auto qi = local_S[i].rows();
    PlantAgent a = agents[i];
    if (a.E_m.cols() != qi || a.F_m.cols() != qi || a.F_mm.cols() != qi)
      throw ValidationError(
          "localize: agent maps must be written against the local generator");
    Matrix Em = Matrix::Zero(a.n(), q);
    Em.middleCols(offset[i], qi) = a.E_m;
    Matrix Fm = Matrix::Zero(a.p(), q);
    Fm.middleCols(offset[i], qi) = a.F_m;
    Matrix Fmm = Matrix::Zero(a.p_m(), q);
    Fmm.middleCols(offset[i], qi) = a.F_mm;
    a.E_m = Em;
    a.F_m = Fm;
    a.F_mm = Fmm;
    a.E_u = Matrix::Zero(a.n(), 0);
    a.F_u = Matrix::Zero(a.p(), 0);
    a.F_mu = Matrix::Zero(a.p_m(), 0);
    a.validate(0, q);
    out.agents.push_back(std::move(a));
  }
  return out;
}

}  // namespace coopreg::plantmodel
