#include "fedlap/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fedlap/kernels.hpp"
#include "fedlap/rng.hpp"

namespace fedlap {

Eigen::VectorXd arnoldi_start_vector(int n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "arnoldi-start"));
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = rng.normal();
  x /= std::sqrt(kernels::squared_norm(x.data(), n, kernels::Exec::Serial));
  return x;
}

ArnoldiFactorization arnoldi(const LinearOperator& apply_operator, int n, int m,
                             const Eigen::VectorXd& start_vector, double operator_scale) {
  if (m < 1 || m > n) throw std::invalid_argument("arnoldi: need 1 <= m <= n");
  if (start_vector.size() != n) throw std::invalid_argument("arnoldi: start vector size mismatch");
  const auto exec = kernels::default_exec();
  const double start_norm = std::sqrt(kernels::squared_norm(start_vector.data(), n, exec));
  if (!(start_norm > 0.0)) throw std::invalid_argument("arnoldi: zero start vector");

  Eigen::MatrixXd q(n, m);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, m);
  q.col(0) = start_vector / start_norm;

  Eigen::VectorXd w(n), coeff, corr;
  double scale_estimate = 0.0;
  for (int l = 0; l < m; ++l) {
    Eigen::VectorXd ql = q.col(l);
    apply_operator(ql, w);

    // classical Gram-Schmidt, two passes; the second pass folds its
    // corrections back into H so the Arnoldi relation stays exact
    kernels::project(q, l + 1, w, coeff, exec);
    kernels::subtract_projection(q, l + 1, coeff, w, exec);
    kernels::project(q, l + 1, w, corr, exec);
    kernels::subtract_projection(q, l + 1, corr, w, exec);
    coeff += corr;
    h.col(l).head(l + 1) = coeff;

    for (int i = 0; i <= l; ++i) scale_estimate = std::max(scale_estimate, std::abs(coeff[i]));
    const double scale = operator_scale > 0.0 ? operator_scale : std::max(scale_estimate, 1.0);

    const double beta = std::sqrt(kernels::squared_norm(w.data(), n, exec));
    if (beta < 1e-10 * scale) {
      // invariant subspace: truncate to the l+1 converged steps
      ArnoldiFactorization f;
      f.q = q.leftCols(l + 1);
      f.h = h.topLeftCorner(l + 1, l + 1);
      f.residual_norm = 0.0;
      return f;
    }
    if (l + 1 < m) {
      h(l + 1, l) = beta;
      q.col(l + 1) = w / beta;
    } else {
      ArnoldiFactorization f;
      f.q = std::move(q);
      f.h = std::move(h);
      f.residual_norm = beta;
      f.next_vector = w / beta;
      return f;
    }
  }
  // unreachable: the loop returns at l == m-1
  throw std::logic_error("arnoldi: fell through iteration loop");
}

ArnoldiFactorization arnoldi(const Laplacian& l, int m, const Eigen::VectorXd& start_vector) {
  return arnoldi(
      [&l](const Eigen::VectorXd& x, Eigen::VectorXd& y) { l.apply(x, y); },
      l.size(), m, start_vector, l.frobenius_norm());
}

TridiagonalEig hessenberg_eig(const Eigen::MatrixXd& h) {
  const int m = static_cast<int>(h.rows());
  if (h.cols() != m) throw std::invalid_argument("hessenberg_eig: matrix not square");
  double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      if (std::abs(h(i, j) - h(j, i)) > 1e-8 * scale)
        throw std::invalid_argument("hessenberg_eig: input asymmetric beyond tolerance");

  // symmetrized tridiagonal bands
  Eigen::VectorXd d(m), e(m);
  for (int i = 0; i < m; ++i) d[i] = h(i, i);
  e[m - 1] = 0.0;
  for (int i = 0; i + 1 < m; ++i) e[i] = 0.5 * (h(i + 1, i) + h(i, i + 1));

  Eigen::MatrixXd z = Eigen::MatrixXd::Identity(m, m);

  // implicit-shift QL sweeps on (d, e) with rotation accumulation
  for (int l = 0; l < m; ++l) {
    int iter = 0;
    for (;;) {
      int split = l;
      while (split + 1 < m) {
        const double dd = std::abs(d[split]) + std::abs(d[split + 1]);
        if (std::abs(e[split]) <= 1e-15 * dd || std::abs(e[split]) < 1e-300) break;
        ++split;
      }
      if (split == l) break;
      if (++iter > 50) throw std::runtime_error("hessenberg_eig: QL failed to converge");

      double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
      double r = std::hypot(g, 1.0);
      g = d[split] - d[l] + e[l] / (g + std::copysign(r, g));
      double s = 1.0, c = 1.0, p = 0.0;
      bool underflow = false;
      for (int i = split - 1; i >= l; --i) {
        double f = s * e[i];
        const double b = c * e[i];
        r = std::hypot(f, g);
        e[i + 1] = r;
        if (r == 0.0) {
          d[i + 1] -= p;
          e[split] = 0.0;
          underflow = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = d[i + 1] - p;
        r = (d[i] - g) * s + 2.0 * c * b;
        p = s * r;
        d[i + 1] = g + p;
        g = c * r - b;
        for (int k = 0; k < m; ++k) {
          f = z(k, i + 1);
          z(k, i + 1) = s * z(k, i) + c * f;
          z(k, i) = c * z(k, i) - s * f;
        }
      }
      if (underflow) continue;
      d[l] -= p;
      e[l] = g;
      e[split] = 0.0;
    }
  }

  // ascending sort, stable in the original index for ties
  std::vector<int> order(static_cast<size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return d[a] < d[b]; });
  TridiagonalEig out;
  out.values.resize(m);
  out.vectors.resize(m, m);
  for (int j = 0; j < m; ++j) {
    out.values[j] = d[order[j]];
    out.vectors.col(j) = z.col(order[j]);
  }
  return out;
}

SpectralBasis spectral_basis(const ArnoldiFactorization& f, int r) {
  const int m = f.steps();
  if (r < 1 || r > m) throw std::invalid_argument("spectral_basis: need 1 <= r <= m");
  TridiagonalEig eig = hessenberg_eig(f.h);
  SpectralBasis basis;
  basis.u = f.q * eig.vectors.leftCols(r);
  basis.lambda = eig.values.head(r);
  return basis;
}

Eigen::MatrixXd reconstruct_adjacency(const SpectralBasis& basis, const Eigen::VectorXi& degrees) {
  const int n = static_cast<int>(basis.u.rows());
  if (degrees.size() != n)
    throw std::invalid_argument("reconstruct_adjacency: degree vector size mismatch");
  Eigen::MatrixXd rec = -basis.u * basis.lambda.asDiagonal() * basis.u.transpose();
  for (int v = 0; v < n; ++v) rec(v, v) += degrees[v];
  return 0.5 * (rec + rec.transpose());
}

double rayleigh_quotient(const Laplacian& l, const Eigen::MatrixXd& s) {
  if (s.rows() != l.size()) throw std::invalid_argument("rayleigh_quotient: row count mismatch");
  const double denom = s.squaredNorm();
  if (!(denom > 0.0)) throw std::invalid_argument("rayleigh_quotient: S is zero");

  double trace_num = 0.0;
  Eigen::VectorXd col(l.size()), ls(l.size());
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    col = s.col(j);
    l.apply(col, ls);
    trace_num += kernels::dot(col.data(), ls.data(), l.size(), kernels::default_exec());
  }

  double edge_num = 0.0;
  for (auto [u, v] : l.graph().edges()) edge_num += (s.row(u) - s.row(v)).squaredNorm();

  const double trace_form = trace_num / denom;
  const double edge_form = edge_num / denom;
  const double ref = std::max({1.0, std::abs(trace_form), std::abs(edge_form)});
  if (std::abs(trace_form - edge_form) > 1e-9 * ref)
    throw std::runtime_error("rayleigh_quotient: trace and edge forms disagree");
  return trace_form;
}

}  // namespace fedlap
