#include "fedlap/kernels.hpp"

#include <algorithm>
#include <cstdlib>
#include <vector>

namespace fedlap::kernels {

namespace {
Exec g_default = []() {
  const char* s = std::getenv("FEDLAP_SERIAL");
  return (s && s[0] == '1') ? Exec::Serial : Exec::Parallel;
}();

constexpr int kBlock = 1024;
// below this much work the OpenMP region overhead dominates; the serial path
// is bit-identical so the switch is invisible
constexpr long kParallelCutoff = 1 << 15;
}  // namespace

Exec default_exec() { return g_default; }
void set_default_exec(Exec e) { g_default = e; }

void laplacian_matvec(const int* offsets, const int* cols, const int* deg, int n,
                      const double* x, double* y, Exec exec) {
  if (exec == Exec::Parallel && offsets[n] + n >= kParallelCutoff) {
#pragma omp parallel for schedule(static)
    for (int u = 0; u < n; ++u) {
      double acc = 0.0;
      for (int e = offsets[u]; e < offsets[u + 1]; ++e) acc += x[cols[e]];
      y[u] = static_cast<double>(deg[u]) * x[u] - acc;
    }
  } else {
    for (int u = 0; u < n; ++u) {
      double acc = 0.0;
      for (int e = offsets[u]; e < offsets[u + 1]; ++e) acc += x[cols[e]];
      y[u] = static_cast<double>(deg[u]) * x[u] - acc;
    }
  }
}

namespace {

// Sum of per-block partials in block order; identical for both exec modes.
template <class BlockFn>
double blocked_reduce(int n, Exec exec, BlockFn block_sum) {
  const int nb = (n + kBlock - 1) / kBlock;
  if (nb == 0) return 0.0;
  std::vector<double> partial(static_cast<size_t>(nb));
  if (exec == Exec::Parallel && n >= kParallelCutoff) {
#pragma omp parallel for schedule(static)
    for (int b = 0; b < nb; ++b) {
      const int lo = b * kBlock;
      const int hi = std::min(n, lo + kBlock);
      partial[b] = block_sum(lo, hi);
    }
  } else {
    for (int b = 0; b < nb; ++b) {
      const int lo = b * kBlock;
      const int hi = std::min(n, lo + kBlock);
      partial[b] = block_sum(lo, hi);
    }
  }
  double total = 0.0;
  for (int b = 0; b < nb; ++b) total += partial[b];
  return total;
}

}  // namespace

double dot(const double* a, const double* b, int n, Exec exec) {
  return blocked_reduce(n, exec, [&](int lo, int hi) {
    double s = 0.0;
    for (int i = lo; i < hi; ++i) s += a[i] * b[i];
    return s;
  });
}

double squared_norm(const double* a, int n, Exec exec) {
  return blocked_reduce(n, exec, [&](int lo, int hi) {
    double s = 0.0;
    for (int i = lo; i < hi; ++i) s += a[i] * a[i];
    return s;
  });
}

void project(const Eigen::MatrixXd& q, int k, const Eigen::VectorXd& w,
             Eigen::VectorXd& h, Exec exec) {
  const int n = static_cast<int>(q.rows());
  h.resize(k);
  if (exec == Exec::Parallel && static_cast<long>(n) * k >= kParallelCutoff) {
#pragma omp parallel for schedule(static)
    for (int t = 0; t < k; ++t) h[t] = dot(q.col(t).data(), w.data(), n, Exec::Serial);
  } else {
    for (int t = 0; t < k; ++t) h[t] = dot(q.col(t).data(), w.data(), n, Exec::Serial);
  }
}

void subtract_projection(const Eigen::MatrixXd& q, int k, const Eigen::VectorXd& h,
                         Eigen::VectorXd& w, Exec exec) {
  const int n = static_cast<int>(q.rows());
  double* wd = w.data();
  // every variant applies the column updates to each element in the same
  // order, so all three are bit-identical
  if (exec == Exec::Parallel && n >= (1 << 17)) {
    // large vectors: column-sequential axpy keeps streaming access
    for (int t = 0; t < k; ++t) {
      const double c = h[t];
      const double* qt = q.col(t).data();
#pragma omp parallel for schedule(static)
      for (int i = 0; i < n; ++i) wd[i] -= c * qt[i];
    }
  } else if (exec == Exec::Parallel && static_cast<long>(n) * k >= kParallelCutoff) {
    // mid-size: one region, threads own disjoint row ranges
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      double acc = wd[i];
      for (int t = 0; t < k; ++t) acc -= h[t] * q(i, t);
      wd[i] = acc;
    }
  } else {
    for (int t = 0; t < k; ++t) {
      const double c = h[t];
      const double* qt = q.col(t).data();
      for (int i = 0; i < n; ++i) wd[i] -= c * qt[i];
    }
  }
}

}  // namespace fedlap::kernels
