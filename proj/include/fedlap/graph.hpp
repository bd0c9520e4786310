#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "fedlap/kernels.hpp"

namespace fedlap {

// Immutable undirected graph with node features and partial labels.
// Edges are stored canonically (u < v); adjacency is kept in CSR form for
// the matvec kernels. Safe for concurrent reads after construction.
class Graph {
 public:
  Graph(int n, std::vector<std::pair<int, int>> canonical_edges, Eigen::MatrixXd features,
        std::vector<int> labels, int self_loops_dropped);

  int node_count() const { return n_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const Eigen::MatrixXd& features() const { return features_; }

  // -1 marks an unlabeled node.
  int label(int v) const { return labels_[v]; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<int>& labeled_set() const { return labeled_; }
  int num_classes() const { return num_classes_; }

  int degree(int v) const { return adj_offsets_[v + 1] - adj_offsets_[v]; }
  const std::vector<int>& adj_offsets() const { return adj_offsets_; }
  const std::vector<int>& adj_cols() const { return adj_cols_; }
  // neighbors of v as [begin, end) into adj_cols()
  std::pair<const int*, const int*> neighbors(int v) const {
    return {adj_cols_.data() + adj_offsets_[v], adj_cols_.data() + adj_offsets_[v + 1]};
  }
  bool has_edge(int u, int v) const;

  int self_loops_dropped() const { return self_loops_dropped_; }

 private:
  int n_;
  std::vector<std::pair<int, int>> edges_;
  Eigen::MatrixXd features_;
  std::vector<int> labels_;
  std::vector<int> labeled_;
  int num_classes_ = 0;
  std::vector<int> adj_offsets_;
  std::vector<int> adj_cols_;
  int self_loops_dropped_ = 0;
};

// Validates ids, symmetrizes and deduplicates the edge list, drops self-loops
// (counted in Graph::self_loops_dropped). Throws std::invalid_argument on
// dangling node ids or feature/label length mismatch.
Graph build_graph(const std::vector<std::pair<int, int>>& edge_list,
                  Eigen::MatrixXd features, std::vector<int> labels = {});

// L = D - A. Degrees stay integral so row sums of the implied matrix are
// exactly zero. Holds a shared handle to the graph; cheap to copy.
class Laplacian {
 public:
  explicit Laplacian(std::shared_ptr<const Graph> g);

  int size() const { return n_; }
  const Eigen::VectorXi& degrees() const { return degrees_; }
  const Graph& graph() const { return *graph_; }

  // y = L x via the CSR kernel
  void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y,
             kernels::Exec exec = kernels::default_exec()) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;

  Eigen::MatrixXd dense() const;
  double frobenius_norm() const;

 private:
  std::shared_ptr<const Graph> graph_;
  int n_;
  Eigen::VectorXi degrees_;
};

Laplacian laplacian(std::shared_ptr<const Graph> g);

// Fraction of edges whose endpoints carry the same label.
// Throws std::invalid_argument if any edge endpoint is unlabeled.
double edge_homophily(const Graph& g);

// Every unordered pair connected independently with probability p.
Graph bernoulli_graph(int n, double p, std::uint64_t seed);

// Planted-partition generator: p_in within a block, p_out across blocks.
// Labels are the block ids; features default to one-hot block indicators
// plus noise unless with_features is false (then a single zero column).
Graph sbm_generate(const std::vector<int>& block_sizes, double p_in, double p_out,
                   std::uint64_t seed, bool with_features = true);

}  // namespace fedlap
