#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>

#include "fedlap/graph.hpp"

namespace fedlap {

// Orthonormal Krylov basis Q, the projected operator H (tridiagonal for
// symmetric input), and the residual that closes the factorization
//   L Q = Q H + residual_norm * next_vector * e_m^T.
// next_vector has size 0 when an invariant subspace terminated the run.
struct ArnoldiFactorization {
  Eigen::MatrixXd q;        // n x m, orthonormal columns
  Eigen::MatrixXd h;        // m x m
  double residual_norm = 0.0;
  Eigen::VectorXd next_vector;

  int steps() const { return static_cast<int>(h.rows()); }
};

using LinearOperator = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;

// Krylov iteration with full re-orthogonalization (classical Gram-Schmidt,
// two passes per step). Stops early with residual_norm = 0 when the residual
// drops below 1e-10 * operator_scale (invariant subspace). operator_scale
// defaults to a running estimate of ||op|| from the Hessenberg entries; pass
// the Frobenius norm when it is known.
ArnoldiFactorization arnoldi(const LinearOperator& apply_operator, int n, int m,
                             const Eigen::VectorXd& start_vector, double operator_scale = 0.0);

ArnoldiFactorization arnoldi(const Laplacian& l, int m, const Eigen::VectorXd& start_vector);

// Deterministic pseudo-random unit start vector shared by the centralized
// and decentralized paths.
Eigen::VectorXd arnoldi_start_vector(int n, std::uint64_t seed);

// Eigendecomposition H = V diag(values) V^T of a symmetric tridiagonal
// matrix by implicit-shift QL with accumulated rotations. Values ascend;
// ties keep the original index order. Throws std::invalid_argument when the
// input is asymmetric beyond 1e-8.
struct TridiagonalEig {
  Eigen::MatrixXd vectors;  // orthonormal columns
  Eigen::VectorXd values;   // ascending
};
TridiagonalEig hessenberg_eig(const Eigen::MatrixXd& h);

// Truncated basis (U_r, lambda_r) used by the learner: U_r = Q V_{:,1..r}
// with columns ordered by ascending eigenvalue.
struct SpectralBasis {
  Eigen::MatrixXd u;        // n x r
  Eigen::VectorXd lambda;   // r, ascending
  int rank() const { return static_cast<int>(lambda.size()); }
};
SpectralBasis spectral_basis(const ArnoldiFactorization& f, int r);

// Low-pass adjacency reconstruction D - U_r Lambda_r U_r^T.
Eigen::MatrixXd reconstruct_adjacency(const SpectralBasis& basis, const Eigen::VectorXi& degrees);

// Tr(S^T L S) / Tr(S^T S). Computes both the trace form and the edge form
//   sum_{(u,v) in E} ||s_u - s_v||^2 / sum_v ||s_v||^2
// and cross-checks them before returning. Throws on S = 0.
double rayleigh_quotient(const Laplacian& l, const Eigen::MatrixXd& s);

}  // namespace fedlap
