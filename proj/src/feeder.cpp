#include "gridincent/feeder.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

#include "gridincent/errors.hpp"

namespace gridincent {

namespace {

struct Tree {
  std::vector<int> parent;   // parent bus per bus (0 for the root's children)
  std::vector<double> r, x;  // feeding-edge impedance per bus
  std::vector<int> order;    // buses 1..N in top-down (BFS) order
  std::vector<int> tin, tout;
};

Tree index_tree(const Network& net) {
  const int n = net.buses;
  Tree t;
  t.parent.assign(n + 1, -1);
  t.r.assign(n + 1, 0.0);
  t.x.assign(n + 1, 0.0);
  std::vector<std::vector<int>> children(n + 1);
  for (const Edge& e : net.edges) {
    t.parent[e.child] = e.parent;
    t.r[e.child] = e.r;
    t.x[e.child] = e.x;
    children[e.parent].push_back(e.child);
  }
  for (auto& c : children) std::sort(c.begin(), c.end());

  t.order.reserve(n);
  std::queue<int> bfs;
  bfs.push(0);
  while (!bfs.empty()) {
    const int u = bfs.front();
    bfs.pop();
    if (u != 0) t.order.push_back(u);
    for (int c : children[u]) bfs.push(c);
  }

  // Euler intervals for O(1) subtree membership.
  t.tin.assign(n + 1, 0);
  t.tout.assign(n + 1, 0);
  int clock = 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};  // (bus, next child index)
  t.tin[0] = clock++;
  while (!stack.empty()) {
    auto& [u, next] = stack.back();
    if (next < static_cast<int>(children[u].size())) {
      const int c = children[u][next++];
      t.tin[c] = clock++;
      stack.push_back({c, 0});
    } else {
      t.tout[u] = clock - 1;
      stack.pop_back();
    }
  }
  return t;
}

}  // namespace

void validate(const Network& net) {
  if (net.buses < 1) throw ValidationError("network: needs at least one prosumer bus");
  if (!(net.base_mva > 0.0) || !(net.base_kv > 0.0))
    throw ValidationError("network: base power and voltage must be positive");
  if (static_cast<int>(net.edges.size()) != net.buses)
    throw TopologyError("network: a radial feeder with " + std::to_string(net.buses) +
                        " buses needs exactly " + std::to_string(net.buses) + " edges, got " +
                        std::to_string(net.edges.size()));
  std::vector<int> feed_count(net.buses + 1, 0);
  for (const Edge& e : net.edges) {
    if (e.parent < 0 || e.parent > net.buses || e.child < 1 || e.child > net.buses)
      throw TopologyError("network: edge " + std::to_string(e.parent) + "->" +
                          std::to_string(e.child) + " references an unknown bus");
    if (e.parent == e.child)
      throw TopologyError("network: self-loop at bus " + std::to_string(e.child));
    if (!(e.r > 0.0) || !std::isfinite(e.r) || e.x < 0.0 || !std::isfinite(e.x))
      throw ValidationError("network: edge " + std::to_string(e.parent) + "->" +
                            std::to_string(e.child) +
                            " needs r > 0 and x >= 0 (per-unit)");
    feed_count[e.child]++;
  }
  for (int b = 1; b <= net.buses; ++b) {
    if (feed_count[b] == 0)
      throw TopologyError("network: bus " + std::to_string(b) + " has no feeding edge");
    if (feed_count[b] > 1)
      throw TopologyError("network: bus " + std::to_string(b) + " is fed by multiple edges");
  }
  // Reachability from the substation rules out cycles detached from the root.
  std::vector<std::vector<int>> children(net.buses + 1);
  for (const Edge& e : net.edges) children[e.parent].push_back(e.child);
  std::vector<char> seen(net.buses + 1, 0);
  std::queue<int> bfs;
  bfs.push(0);
  seen[0] = 1;
  while (!bfs.empty()) {
    const int u = bfs.front();
    bfs.pop();
    for (int c : children[u])
      if (!seen[c]) {
        seen[c] = 1;
        bfs.push(c);
      }
  }
  for (int b = 1; b <= net.buses; ++b)
    if (!seen[b])
      throw TopologyError("network: bus " + std::to_string(b) +
                          " is not connected to the substation (cycle or orphan)");
}

SensitivityModel build_sensitivities(const Network& net, kernels::Backend backend) {
  validate(net);
  const int n = net.buses;
  const Tree t = index_tree(net);

  SensitivityModel model;
  model.R = Matrix(n, n, 0.0);
  model.X = Matrix(n, n, 0.0);
  model.omega.assign(n, 1.0);

  // Column recursion: the entry for (bus, m) extends the parent's entry by
  // the feeding-edge impedance exactly when m lies in the bus's subtree.
  // Columns are independent, so they parallelize without changing any
  // summation order.
  const auto fill_column = [&](long mi) {
    const int mb = static_cast<int>(mi) + 1;
    for (int bus : t.order) {
      const int p = t.parent[bus];
      const double baseR = (p == 0) ? 0.0 : model.R(p - 1, mi);
      const double baseX = (p == 0) ? 0.0 : model.X(p - 1, mi);
      const bool in_subtree = t.tin[mb] >= t.tin[bus] && t.tin[mb] <= t.tout[bus];
      model.R(bus - 1, mi) = baseR + (in_subtree ? t.r[bus] : 0.0);
      model.X(bus - 1, mi) = baseX + (in_subtree ? t.x[bus] : 0.0);
    }
  };
  if (backend == kernels::Backend::openmp) {
#pragma omp parallel for schedule(static)
    for (long mi = 0; mi < n; ++mi) fill_column(mi);
  } else {
    for (long mi = 0; mi < n; ++mi) fill_column(mi);
  }
  return model;
}

SensitivityModel build_sensitivities_reference(const Network& net) {
  validate(net);
  const int n = net.buses;
  const Tree t = index_tree(net);

  // Root-first cumulative impedance along each bus's path; the common-path
  // value is the cumulative sum at the lowest common ancestor.
  std::vector<double> cumR(n + 1, 0.0), cumX(n + 1, 0.0);
  std::vector<int> depth(n + 1, 0);
  for (int bus : t.order) {
    cumR[bus] = cumR[t.parent[bus]] + t.r[bus];
    cumX[bus] = cumX[t.parent[bus]] + t.x[bus];
    depth[bus] = depth[t.parent[bus]] + 1;
  }

  SensitivityModel model;
  model.R = Matrix(n, n, 0.0);
  model.X = Matrix(n, n, 0.0);
  model.omega.assign(n, 1.0);
  for (int a = 1; a <= n; ++a) {
    for (int b = 1; b <= n; ++b) {
      int u = a, v = b;
      while (depth[u] > depth[v]) u = t.parent[u];
      while (depth[v] > depth[u]) v = t.parent[v];
      while (u != v) {
        u = t.parent[u];
        v = t.parent[v];
      }
      model.R(a - 1, b - 1) = cumR[u];
      model.X(a - 1, b - 1) = cumX[u];
    }
  }
  return model;
}

Vector voltages_of(const SensitivityModel& model, std::span<const double> p,
                   std::span<const double> q, kernels::Backend backend) {
  const std::size_t n = model.omega.size();
  if (p.size() != n || q.size() != n)
    throw ValidationError("voltages_of: injection vectors must have one entry per bus");
  Vector v(n);
  const auto row = [&](long i) {
    v[i] = kernels::dot(model.R.row_span(i), p, kernels::Backend::serial) +
           kernels::dot(model.X.row_span(i), q, kernels::Backend::serial) + model.omega[i];
  };
  if (backend == kernels::Backend::openmp) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(n); ++i) row(i);
  } else {
    for (long i = 0; i < static_cast<long>(n); ++i) row(i);
  }
  return v;
}

double feeder_power_of(std::span<const double> d, std::span<const double> r) {
  if (d.size() != r.size())
    throw ValidationError("feeder_power_of: demand and generation sizes differ");
  return kernels::sum(d) - kernels::sum(r);
}

}  // namespace gridincent
