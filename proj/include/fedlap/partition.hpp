#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "fedlap/graph.hpp"

namespace fedlap {

// The knowledge slice a client holds: internal nodes and edges, the
// interconnection rows/columns of A incident to its nodes, and its own
// features/labels. Views never contain features or labels of foreign nodes.
// Immutable after construction.
struct PartitionedView {
  int client_id = 0;
  std::vector<int> internal_nodes;                    // sorted global ids
  std::vector<int> external_neighbors;                // sorted global ids
  std::vector<std::pair<int, int>> internal_edges;    // global ids, both internal
  std::vector<std::pair<int, int>> interconnections;  // (internal, external) global ids
  // Adjacency lists of internal nodes over global ids. Because A is
  // symmetric this single structure is both the row block A_{V_i,:} and the
  // column knowledge A_{:,V_i}.
  std::vector<std::vector<int>> neighbors;  // indexed by local id
  Eigen::MatrixXd features;                 // row per internal node, local order
  std::vector<int> labels;                  // -1 unlabeled, local order
  std::vector<int> labeled;                 // global ids of labeled internal nodes
  std::unordered_map<int, int> global_to_local;
  // Index-set membership is public in this setting; every view carries the
  // full owner map but no foreign edges, features, or labels.
  std::shared_ptr<const std::vector<int>> node_owner;

  int size() const { return static_cast<int>(internal_nodes.size()); }
  int local(int global_id) const { return global_to_local.at(global_id); }
  int degree(int local_id) const { return static_cast<int>(neighbors[local_id].size()); }
};

enum class PartitionScheme { Random, BfsCommunity };

PartitionScheme parse_partition_scheme(const std::string& name);

// Splits [0, n) into K client views. `random` draws i.i.d. assignments and
// rebalances to sizes differing by at most one; `bfs-community` grows K
// regions by multi-source BFS with a ceil(n/K) balance cap.
// Deterministic in (g, scheme, K, seed). Throws ConfigError for K < 1 or K > n.
std::vector<PartitionedView> partition(std::shared_ptr<const Graph> g, PartitionScheme scheme,
                                       int k, std::uint64_t seed);

// assignment[v] = client id; used by the CLI to persist partitions
std::vector<int> partition_assignment(const Graph& g, PartitionScheme scheme, int k,
                                      std::uint64_t seed);
std::vector<PartitionedView> views_from_assignment(std::shared_ptr<const Graph> g,
                                                   const std::vector<int>& assignment, int k);

// Fraction of edges crossing client boundaries.
double cut_fraction(const Graph& g, const std::vector<int>& assignment);

}  // namespace fedlap
