#include "fedlap/partition.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <stdexcept>

#include "fedlap/errors.hpp"
#include "fedlap/rng.hpp"

namespace fedlap {

PartitionScheme parse_partition_scheme(const std::string& name) {
  if (name == "random") return PartitionScheme::Random;
  if (name == "bfs-community") return PartitionScheme::BfsCommunity;
  throw ConfigError("unknown partition scheme: " + name);
}

namespace {

std::vector<int> random_assignment(const Graph& g, int k, std::uint64_t seed) {
  const int n = g.node_count();
  Rng rng(derive_seed(seed, "partition-random"));
  std::vector<int> assign(static_cast<size_t>(n));
  for (int v = 0; v < n; ++v) assign[v] = static_cast<int>(rng.uniform_below(k));

  // rebalance to sizes differing by <= 1: clients [0, n % k) get the +1
  std::vector<int> target(static_cast<size_t>(k), n / k);
  for (int c = 0; c < n % k; ++c) ++target[c];
  std::vector<int> size(static_cast<size_t>(k), 0);
  for (int v = 0; v < n; ++v) ++size[assign[v]];
  std::vector<int> deficit;  // clients below target, repeated per missing slot
  for (int c = 0; c < k; ++c)
    for (int s = size[c]; s < target[c]; ++s) deficit.push_back(c);
  size_t next = 0;
  for (int v = 0; v < n && next < deficit.size(); ++v) {
    const int c = assign[v];
    if (size[c] > target[c]) {
      --size[c];
      assign[v] = deficit[next++];
      ++size[assign[v]];
    }
  }
  return assign;
}

std::vector<int> bfs_assignment(const Graph& g, int k, std::uint64_t seed) {
  const int n = g.node_count();
  Rng rng(derive_seed(seed, "partition-bfs"));
  const int cap = (n + k - 1) / k;
  std::vector<int> assign(static_cast<size_t>(n), -1);
  std::vector<int> size(static_cast<size_t>(k), 0);
  std::vector<std::deque<int>> frontier(static_cast<size_t>(k));

  // distinct random seeds, one per region
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i)
    std::swap(order[i], order[rng.uniform_below(static_cast<std::uint64_t>(i) + 1)]);
  for (int c = 0; c < k; ++c) {
    assign[order[c]] = c;
    ++size[c];
    frontier[c].push_back(order[c]);
  }

  int assigned = k;
  int next_unassigned = 0;
  while (assigned < n) {
    bool progressed = false;
    for (int c = 0; c < k; ++c) {
      if (size[c] >= cap) continue;
      while (!frontier[c].empty() && size[c] < cap) {
        const int u = frontier[c].front();
        int claimed = -1;
        auto [b, e] = g.neighbors(u);
        for (const int* it = b; it != e; ++it) {
          if (assign[*it] < 0) {
            claimed = *it;
            break;
          }
        }
        if (claimed < 0) {
          frontier[c].pop_front();
          continue;
        }
        assign[claimed] = c;
        ++size[c];
        ++assigned;
        frontier[c].push_back(claimed);
        progressed = true;
        break;  // round-robin between regions keeps growth balanced
      }
    }
    if (!progressed) {
      // disconnected remainder: reseed the smallest open region
      while (next_unassigned < n && assign[next_unassigned] >= 0) ++next_unassigned;
      if (next_unassigned >= n) break;
      int best = -1;
      for (int c = 0; c < k; ++c)
        if (size[c] < cap && (best < 0 || size[c] < size[best])) best = c;
      if (best < 0) best = static_cast<int>(
          std::min_element(size.begin(), size.end()) - size.begin());
      assign[next_unassigned] = best;
      ++size[best];
      ++assigned;
      frontier[best].push_back(next_unassigned);
    }
  }
  return assign;
}

}  // namespace

std::vector<int> partition_assignment(const Graph& g, PartitionScheme scheme, int k,
                                      std::uint64_t seed) {
  const int n = g.node_count();
  if (k < 1 || k > n)
    throw ConfigError("partition: K must be in [1, n], got K=" + std::to_string(k) +
                      " n=" + std::to_string(n));
  return scheme == PartitionScheme::Random ? random_assignment(g, k, seed)
                                           : bfs_assignment(g, k, seed);
}

std::vector<PartitionedView> views_from_assignment(std::shared_ptr<const Graph> g,
                                                   const std::vector<int>& assignment, int k) {
  const Graph& graph = *g;
  const int n = graph.node_count();
  auto owner = std::make_shared<const std::vector<int>>(assignment);
  std::vector<PartitionedView> views(static_cast<size_t>(k));
  for (int c = 0; c < k; ++c) {
    views[c].client_id = c;
    views[c].node_owner = owner;
  }
  for (int v = 0; v < n; ++v) views[assignment[v]].internal_nodes.push_back(v);

  for (int c = 0; c < k; ++c) {
    PartitionedView& view = views[c];
    const int ni = view.size();
    view.features.resize(ni, graph.features().cols());
    view.labels.resize(ni);
    view.neighbors.resize(ni);
    for (int i = 0; i < ni; ++i) {
      const int v = view.internal_nodes[i];
      view.global_to_local.emplace(v, i);
      view.features.row(i) = graph.features().row(v);
      view.labels[i] = graph.label(v);
      if (view.labels[i] >= 0) view.labeled.push_back(v);
      auto [b, e] = graph.neighbors(v);
      view.neighbors[i].assign(b, e);
    }
    std::vector<int> ext;
    for (int i = 0; i < ni; ++i) {
      const int v = view.internal_nodes[i];
      for (int u : view.neighbors[i]) {
        if (assignment[u] == c) {
          if (v < u) view.internal_edges.emplace_back(v, u);
        } else {
          view.interconnections.emplace_back(v, u);
          ext.push_back(u);
        }
      }
    }
    std::sort(ext.begin(), ext.end());
    ext.erase(std::unique(ext.begin(), ext.end()), ext.end());
    view.external_neighbors = std::move(ext);
  }
  return views;
}

std::vector<PartitionedView> partition(std::shared_ptr<const Graph> g, PartitionScheme scheme,
                                       int k, std::uint64_t seed) {
  auto assignment = partition_assignment(*g, scheme, k, seed);
  return views_from_assignment(std::move(g), assignment, k);
}

double cut_fraction(const Graph& g, const std::vector<int>& assignment) {
  if (g.edge_count() == 0) return 0.0;
  int cut = 0;
  for (auto [u, v] : g.edges())
    if (assignment[u] != assignment[v]) ++cut;
  return static_cast<double>(cut) / static_cast<double>(g.edge_count());
}

}  // namespace fedlap
