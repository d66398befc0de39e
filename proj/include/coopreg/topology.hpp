// Communication topology: weighted digraphs over one leader (node 0) plus N
// followers, switching schedules, and the connectivity certificates the gain
// rules depend on.
#pragma once

#include "coopreg/types.hpp"

namespace coopreg::topology {

// Adjacency convention: entry (i, j) is the weight on the edge j -> i, so row
// i lists what node i receives. Node 0 is the leader and receives nothing.
struct WeightedDigraph {
  explicit WeightedDigraph(int node_count, bool undirected = false);

  int node_count() const { return static_cast<int>(adjacency.rows()); }
  int follower_count() const { return node_count() - 1; }

  // Directed edge from -> to with positive weight. For undirected graphs a
  // follower-follower edge installs both directions; leader edges stay
  // one-way outbound.
  void add_edge(int from, int to, double weight);

  // Diagonal zero, nonnegative weights, empty leader row, and symmetry of
  // the follower block when the undirected flag is set.
  void validate() const;

  Matrix adjacency;
  bool undirected = false;
};

// Graph Laplacian. followers_only drops the leader row/column; its diagonal
// then counts follower neighbours only, so h_matrix() below decomposes as
// Laplacian plus leader-pinning diagonal.
Matrix laplacian(const WeightedDigraph& g, bool followers_only);

// H = L_followers + diag(a_10, ..., a_N0). Every eigenvalue has positive
// real part exactly when the leader reaches every follower.
Matrix h_matrix(const WeightedDigraph& g);

// Edge-union of a family over identical node sets; weights add.
WeightedDigraph union_graph(const std::vector<WeightedDigraph>& graphs);

// True iff every follower is reachable from the leader along directed edges.
bool reachable_from_leader(const WeightedDigraph& g);

// delta = min Re(eigenvalue of H). Throws PreconditionError when any
// eigenvalue fails Re > 0 (leader-disconnected graph).
double min_real_eig_h(const Matrix& H);

// Piecewise-constant graph selection. Entry k activates graphs[active[k]]
// on [times[k], times[k+1]); the last entry extends to the horizon. A
// positive period repeats the pattern cyclically.
struct SwitchingSchedule {
  std::vector<WeightedDigraph> graphs;
  std::vector<double> times;   // ascending, times[0] == 0
  std::vector<int> active;     // same length as times
  double dwell = 0.0;          // minimum interval length tau
  double period = 0.0;         // 0 = aperiodic
  double window = 0.0;         // joint-connectivity window nu (0 = auto)

  bool is_static() const { return times.size() <= 1; }
  int active_index(double t) const;
  void validate() const;

  // Maximal constant-graph segments covering [0, horizon).
  struct Segment {
    double t0;
    double t1;
    int graph;
  };
  std::vector<Segment> segments(double horizon) const;

  // Effective certification window: explicit value, else one full pattern.
  double effective_window() const;
};

struct JointConnectivityReport {
  bool certified = false;
  int windows_checked = 0;
  // First window whose union graph missed a follower (valid when !certified).
  double fail_t0 = 0.0;
  double fail_t1 = 0.0;
};

// Greedy certificate: tile [0, horizon) with consecutive windows of length
// nu; each window's union graph must reach every follower from the leader.
// Conservative: a false verdict means "not certified", not "violated".
JointConnectivityReport verify_jointly_connected(
    const SwitchingSchedule& schedule, double horizon, double nu);

}  // namespace coopreg::topology
