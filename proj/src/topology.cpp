#include "coopreg/topology.hpp"

#include "coopreg/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

namespace coopreg::topology {

WeightedDigraph::WeightedDigraph(int node_count, bool undirected_)
    : adjacency(Matrix::Zero(node_count, node_count)), undirected(undirected_) {
  if (node_count < 2)
    throw ValidationError("graph needs a leader and at least one follower");
}

void WeightedDigraph::add_edge(int from, int to, double weight) {
  if (from < 0 || from >= node_count() || to < 0 || to >= node_count())
    throw ValidationError("edge endpoint out of range");
  if (from == to) throw ValidationError("self-loops are not allowed");
  if (to == 0) throw ValidationError("leader receives no edges");
  if (weight <= 0.0) throw ValidationError("edge weight must be positive");
  adjacency(to, from) = weight;
  if (undirected && from != 0) adjacency(from, to) = weight;
}

void WeightedDigraph::validate() const {
  const auto n = adjacency.rows();
  if (n != adjacency.cols() || n < 2)
    throw ValidationError("adjacency must be square with >= 2 nodes");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (adjacency(i, i) != 0.0)
      throw ValidationError("adjacency diagonal must be zero");
    for (Eigen::Index j = 0; j < n; ++j)
      if (adjacency(i, j) < 0.0)
        throw ValidationError("edge weights must be nonnegative");
  }
  if (!adjacency.row(0).isZero(0))
    throw ValidationError("leader receives no edges");
  if (undirected) {
    const auto f = adjacency.bottomRightCorner(n - 1, n - 1);
    if (!f.isApprox(f.transpose(), 0.0))
      throw ValidationError("undirected graph: follower block not symmetric");
  }
}

Matrix laplacian(const WeightedDigraph& g, bool followers_only) {
  const Matrix& a = g.adjacency;
  if (followers_only) {
    const auto N = g.follower_count();
    Matrix L = -a.bottomRightCorner(N, N);
    for (Eigen::Index i = 0; i < N; ++i)
      L(i, i) = a.row(i + 1).tail(N).sum() - a(i + 1, i + 1);
    return L;
  }
  Matrix L = -a;
  for (Eigen::Index i = 0; i < a.rows(); ++i) L(i, i) = a.row(i).sum();
  return L;
}

Matrix h_matrix(const WeightedDigraph& g) {
  const auto N = g.follower_count();
  Matrix H = laplacian(g, /*followers_only=*/true);
  H += Matrix(g.adjacency.col(0).tail(N).asDiagonal());
  return H;
}

WeightedDigraph union_graph(const std::vector<WeightedDigraph>& graphs) {
  if (graphs.empty()) throw ValidationError("union of an empty graph family");
  bool undirected = true;
  for (const auto& g : graphs) {
    if (g.node_count() != graphs.front().node_count())
      throw ValidationError("union: node counts differ");
    undirected = undirected && g.undirected;
  }
  WeightedDigraph u(graphs.front().node_count(), undirected);
  for (const auto& g : graphs) u.adjacency += g.adjacency;
  return u;
}

bool reachable_from_leader(const WeightedDigraph& g) {
  const auto n = g.node_count();
  std::vector<bool> seen(n, false);
  std::deque<int> frontier{0};
  seen[0] = true;
  int count = 1;
  while (!frontier.empty()) {
    const int j = frontier.front();
    frontier.pop_front();
    for (int i = 0; i < n; ++i) {
      if (!seen[i] && g.adjacency(i, j) > 0.0) {
        seen[i] = true;
        ++count;
        frontier.push_back(i);
      }
    }
  }
  return count == n;
}

double min_real_eig_h(const Matrix& H) {
  if (H.size() == 0) throw DimensionError("min_real_eig_h: empty matrix");
  double delta = std::numeric_limits<double>::infinity();
  for (const auto& v : numkit::spectrum(H).values)
    delta = std::min(delta, v.real());
  if (delta <= numkit::kSpectrumTol)
    throw PreconditionError(
        "graph connectivity: H has an eigenvalue with nonpositive real part "
        "(leader does not reach every follower)");
  return delta;
}

int SwitchingSchedule::active_index(double t) const {
  if (times.empty()) throw ValidationError("schedule has no entries");
  double tp = t;
  if (period > 0.0) {
    tp = std::fmod(t, period);
    if (tp < 0.0) tp += period;
  }
  auto it = std::upper_bound(times.begin(), times.end(), tp);
  const auto k = static_cast<std::size_t>(
      std::max<std::ptrdiff_t>(0, (it - times.begin()) - 1));
  return active[k];
}

void SwitchingSchedule::validate() const {
  if (graphs.empty()) throw ValidationError("schedule: no graphs");
  if (times.empty() || times.size() != active.size())
    throw ValidationError("schedule: times/active length mismatch");
  if (times.front() != 0.0)
    throw ValidationError("schedule: first entry must start at t = 0");
  for (const auto& g : graphs) {
    g.validate();
    if (g.node_count() != graphs.front().node_count())
      throw ValidationError("schedule: graph node counts differ");
  }
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (active[k] < 0 || active[k] >= static_cast<int>(graphs.size()))
      throw ValidationError("schedule: graph index out of range");
    if (k > 0 && !(times[k] > times[k - 1]))
      throw ValidationError("schedule: times must be strictly increasing");
  }
  if (times.size() > 1) {
    if (dwell <= 0.0)
      throw ValidationError("schedule: switching requires a positive dwell");
    const double eps = 1e-12;
    for (std::size_t k = 1; k < times.size(); ++k)
      if (times[k] - times[k - 1] < dwell - eps)
        throw ValidationError("schedule: interval shorter than dwell time");
    if (period > 0.0 && period - times.back() < dwell - eps)
      throw ValidationError("schedule: wrap interval shorter than dwell time");
  }
  if (period > 0.0 && period <= times.back())
    throw ValidationError("schedule: period must exceed the last switch time");
}

std::vector<SwitchingSchedule::Segment> SwitchingSchedule::segments(
    double horizon) const {
  if (horizon <= 0.0) throw ValidationError("segments: horizon must be > 0");
  std::vector<Segment> out;
  if (is_static()) {
    out.push_back({0.0, horizon, active.empty() ? 0 : active[0]});
    return out;
  }
  if (period > 0.0) {
    for (long cycle = 0;; ++cycle) {
      const double base = static_cast<double>(cycle) * period;
      if (base >= horizon) break;
      for (std::size_t k = 0; k < times.size(); ++k) {
        const double t0 = base + times[k];
        const double t1 =
            (k + 1 < times.size()) ? base + times[k + 1] : base + period;
        if (t0 >= horizon) break;
        out.push_back({t0, std::min(t1, horizon), active[k]});
      }
    }
  } else {
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double t0 = times[k];
      const double t1 =
          (k + 1 < times.size()) ? times[k + 1] : horizon;
      if (t0 >= horizon) break;
      out.push_back({t0, std::min(t1, horizon), active[k]});
    }
  }
  // merge neighbours that kept the same graph
  std::vector<Segment> merged;
  for (const auto& s : out) {
    if (!merged.empty() && merged.back().graph == s.graph &&
        merged.back().t1 == s.t0)
      merged.back().t1 = s.t1;
    else
      merged.push_back(s);
  }
  return merged;
}

double SwitchingSchedule::effective_window() const {
  if (window > 0.0) return window;
  if (period > 0.0) return period;
  return times.back() > 0.0 ? times.back() + dwell : dwell;
}

JointConnectivityReport verify_jointly_connected(
    const SwitchingSchedule& schedule, double horizon, double nu) {
  if (nu <= 0.0)
    throw ValidationError("joint connectivity: window must be positive");
  if (horizon <= 0.0)
    throw ValidationError("joint connectivity: horizon must be positive");
  schedule.validate();

  const auto segs = schedule.segments(horizon);
  JointConnectivityReport report;
  for (double w = 0.0; w < horizon; w += nu) {
    const double w1 = std::min(w + nu, horizon);
    std::set<int> ids;
    for (const auto& s : segs)
      if (s.t0 < w1 && s.t1 > w) ids.insert(s.graph);
    std::vector<WeightedDigraph> active_graphs;
    for (int id : ids) active_graphs.push_back(schedule.graphs[id]);
    ++report.windows_checked;
    if (!reachable_from_leader(union_graph(active_graphs))) {
      report.certified = false;
      report.fail_t0 = w;
      report.fail_t1 = w1;
      return report;
    }
  }
  report.certified = true;
  return report;
}

}  // namespace coopreg::topology
