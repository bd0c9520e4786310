#include "fedlap/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fedlap/rng.hpp"

namespace fedlap {

Graph::Graph(int n, std::vector<std::pair<int, int>> canonical_edges, Eigen::MatrixXd features,
             std::vector<int> labels, int self_loops_dropped)
    : n_(n),
      edges_(std::move(canonical_edges)),
      features_(std::move(features)),
      labels_(std::move(labels)),
      self_loops_dropped_(self_loops_dropped) {
  if (labels_.empty()) labels_.assign(static_cast<size_t>(n_), -1);
  for (int v = 0; v < n_; ++v) {
    if (labels_[v] >= 0) {
      labeled_.push_back(v);
      num_classes_ = std::max(num_classes_, labels_[v] + 1);
    }
  }
  // CSR over both directions
  adj_offsets_.assign(static_cast<size_t>(n_) + 1, 0);
  for (auto [u, v] : edges_) {
    ++adj_offsets_[u + 1];
    ++adj_offsets_[v + 1];
  }
  for (int i = 0; i < n_; ++i) adj_offsets_[i + 1] += adj_offsets_[i];
  adj_cols_.resize(static_cast<size_t>(2) * edges_.size());
  std::vector<int> cursor(adj_offsets_.begin(), adj_offsets_.end() - 1);
  for (auto [u, v] : edges_) {
    adj_cols_[cursor[u]++] = v;
    adj_cols_[cursor[v]++] = u;
  }
  for (int v = 0; v < n_; ++v)
    std::sort(adj_cols_.begin() + adj_offsets_[v], adj_cols_.begin() + adj_offsets_[v + 1]);
}

bool Graph::has_edge(int u, int v) const {
  auto [b, e] = neighbors(u);
  return std::binary_search(b, e, v);
}

Graph build_graph(const std::vector<std::pair<int, int>>& edge_list, Eigen::MatrixXd features,
                  std::vector<int> labels) {
  const int n = static_cast<int>(features.rows());
  if (n <= 0) throw std::invalid_argument("build_graph: empty feature matrix");
  if (!labels.empty() && static_cast<int>(labels.size()) != n)
    throw std::invalid_argument("build_graph: label count " + std::to_string(labels.size()) +
                                " != node count " + std::to_string(n));
  int dropped = 0;
  std::vector<std::pair<int, int>> canon;
  canon.reserve(edge_list.size());
  for (auto [u, v] : edge_list) {
    if (u < 0 || u >= n || v < 0 || v >= n)
      throw std::invalid_argument("build_graph: edge (" + std::to_string(u) + "," +
                                  std::to_string(v) + ") references a node outside [0," +
                                  std::to_string(n) + ")");
    if (u == v) {
      ++dropped;
      continue;
    }
    canon.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(canon.begin(), canon.end());
  canon.erase(std::unique(canon.begin(), canon.end()), canon.end());
  return Graph(n, std::move(canon), std::move(features), std::move(labels), dropped);
}

Laplacian::Laplacian(std::shared_ptr<const Graph> g) : graph_(std::move(g)) {
  n_ = graph_->node_count();
  degrees_.resize(n_);
  for (int v = 0; v < n_; ++v) degrees_[v] = graph_->degree(v);
}

Laplacian laplacian(std::shared_ptr<const Graph> g) { return Laplacian(std::move(g)); }

void Laplacian::apply(const Eigen::VectorXd& x, Eigen::VectorXd& y, kernels::Exec exec) const {
  y.resize(n_);
  kernels::laplacian_matvec(graph_->adj_offsets().data(), graph_->adj_cols().data(),
                            degrees_.data(), n_, x.data(), y.data(), exec);
}

Eigen::VectorXd Laplacian::apply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y;
  apply(x, y);
  return y;
}

Eigen::MatrixXd Laplacian::dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_, n_);
  for (int v = 0; v < n_; ++v) m(v, v) = degrees_[v];
  for (auto [u, v] : graph_->edges()) {
    m(u, v) = -1.0;
    m(v, u) = -1.0;
  }
  return m;
}

double Laplacian::frobenius_norm() const {
  // ||L||_F^2 = sum d_v^2 (diagonal) + 2m off-diagonal (-1)^2 entries, 2m = sum d_v
  double s = 0.0;
  for (int v = 0; v < n_; ++v) {
    const double d = degrees_[v];
    s += d * d + d;
  }
  return std::sqrt(s);
}

double edge_homophily(const Graph& g) {
  if (g.edge_count() == 0) throw std::invalid_argument("edge_homophily: graph has no edges");
  int same = 0;
  for (auto [u, v] : g.edges()) {
    if (g.label(u) < 0 || g.label(v) < 0)
      throw std::invalid_argument("edge_homophily: unlabeled endpoint on edge (" +
                                  std::to_string(u) + "," + std::to_string(v) + ")");
    if (g.label(u) == g.label(v)) ++same;
  }
  return static_cast<double>(same) / static_cast<double>(g.edge_count());
}

Graph bernoulli_graph(int n, double p, std::uint64_t seed) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("bernoulli_graph: p outside [0,1]");
  Rng rng(derive_seed(seed, "bernoulli-graph"));
  std::vector<std::pair<int, int>> edges;
  if (p >= 1.0) {
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v) edges.emplace_back(u, v);
  } else if (p > 0.0) {
    // geometric skipping over the flattened pair index space
    const double log1mp = std::log1p(-p);
    std::int64_t total = static_cast<std::int64_t>(n) * (n - 1) / 2;
    std::int64_t idx = -1;
    for (;;) {
      double u01 = rng.uniform01();
      while (u01 <= 0.0) u01 = rng.uniform01();
      idx += 1 + static_cast<std::int64_t>(std::floor(std::log(u01) / log1mp));
      if (idx >= total) break;
      // unflatten: pair index -> (u, v), row-major over u < v
      std::int64_t rem = idx;
      int u = 0;
      std::int64_t row = n - 1;
      while (rem >= row) {
        rem -= row;
        --row;
        ++u;
      }
      edges.emplace_back(u, u + 1 + static_cast<int>(rem));
    }
  }
  Eigen::MatrixXd feats = Eigen::MatrixXd::Zero(n, 1);
  return Graph(n, std::move(edges), std::move(feats), {}, 0);
}

Graph sbm_generate(const std::vector<int>& block_sizes, double p_in, double p_out,
                   std::uint64_t seed, bool with_features) {
  if (p_in < 0.0 || p_in > 1.0 || p_out < 0.0 || p_out > 1.0)
    throw std::invalid_argument("sbm_generate: probability outside [0,1]");
  int n = 0;
  for (int s : block_sizes) {
    if (s <= 0) throw std::invalid_argument("sbm_generate: nonpositive block size");
    n += s;
  }
  const int nblocks = static_cast<int>(block_sizes.size());
  std::vector<int> block_of(static_cast<size_t>(n));
  {
    int v = 0;
    for (int b = 0; b < nblocks; ++b)
      for (int i = 0; i < block_sizes[b]; ++i) block_of[v++] = b;
  }
  Rng rng(derive_seed(seed, "sbm-generate"));
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      const double p = (block_of[u] == block_of[v]) ? p_in : p_out;
      if (rng.bernoulli(p)) edges.emplace_back(u, v);
    }
  std::vector<int> labels(block_of.begin(), block_of.end());
  Eigen::MatrixXd feats;
  if (with_features) {
    // uninformative Gaussian features: on SBM fixtures the label signal
    // lives in the graph structure, not the feature matrix
    Rng frng(derive_seed(seed, "sbm-features"));
    feats.resize(n, 8);
    for (int v = 0; v < n; ++v)
      for (int j = 0; j < 8; ++j) feats(v, j) = frng.normal();
  } else {
    feats = Eigen::MatrixXd::Zero(n, 1);
  }
  return Graph(n, std::move(edges), std::move(feats), std::move(labels), 0);
}

}  // namespace fedlap
