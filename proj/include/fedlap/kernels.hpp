#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace fedlap::kernels {

// The hot loops of the Arnoldi path. Each kernel has a serial reference and
// an OpenMP variant that produce bit-identical output: reductions accumulate
// fixed-size blocks in index order, so the result does not depend on the
// thread count. Tests and the benchmark target compare the two directly.

enum class Exec { Serial, Parallel };

// Process-wide default. Parallel unless FEDLAP_SERIAL=1 is set.
Exec default_exec();
void set_default_exec(Exec e);

// y = diag(deg) x - A x on a CSR adjacency (offsets/cols), the Laplacian matvec.
void laplacian_matvec(const int* offsets, const int* cols, const int* deg, int n,
                      const double* x, double* y, Exec exec);

// Blocked deterministic reductions.
double dot(const double* a, const double* b, int n, Exec exec);
double squared_norm(const double* a, int n, Exec exec);

// h = Q(:, 0..k)^T w   (classical Gram-Schmidt projection coefficients)
void project(const Eigen::MatrixXd& q, int k, const Eigen::VectorXd& w,
             Eigen::VectorXd& h, Exec exec);

// w -= Q(:, 0..k) h
void subtract_projection(const Eigen::MatrixXd& q, int k, const Eigen::VectorXd& h,
                         Eigen::VectorXd& w, Exec exec);

}  // namespace fedlap::kernels
