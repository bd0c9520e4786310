#pragma once

// Test-only oracles, kept independent of the code paths they check: dense
// eigendecompositions go through Eigen's solver, random fixtures through a
// dedicated generator, never through the library's Arnoldi machinery.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <memory>
#include <vector>

#include "fedlap/graph.hpp"
#include "fedlap/rng.hpp"

namespace oracle {

struct DenseEig {
  Eigen::MatrixXd vectors;
  Eigen::VectorXd values;  // ascending
};

inline DenseEig dense_eig(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  return {solver.eigenvectors(), solver.eigenvalues()};
}

inline DenseEig laplacian_eig(const fedlap::Laplacian& l) { return dense_eig(l.dense()); }

// plain O(n^2) matvec against the dense matrix
inline Eigen::VectorXd dense_matvec(const Eigen::MatrixXd& m, const Eigen::VectorXd& x) {
  return m * x;
}

inline std::shared_ptr<const fedlap::Graph> triangle_graph() {
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(3, 1);
  return std::make_shared<fedlap::Graph>(
      fedlap::build_graph({{0, 1}, {1, 2}, {0, 2}}, f));
}

inline std::shared_ptr<const fedlap::Graph> path3_graph() {
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(3, 1);
  return std::make_shared<fedlap::Graph>(fedlap::build_graph({{0, 1}, {1, 2}}, f));
}

// connected sparse random graph: a Hamiltonian-ish path plus extra random edges
inline std::shared_ptr<const fedlap::Graph> random_connected_graph(int n, double extra_edge_prob,
                                                                   std::uint64_t seed) {
  fedlap::Rng rng(seed);
  std::vector<std::pair<int, int>> edges;
  for (int v = 1; v < n; ++v) edges.emplace_back(v - 1, v);
  for (int u = 0; u < n; ++u)
    for (int v = u + 2; v < n; ++v)
      if (rng.uniform01() < extra_edge_prob) edges.emplace_back(u, v);
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(n, 1);
  return std::make_shared<fedlap::Graph>(fedlap::build_graph(edges, f));
}

}  // namespace oracle
