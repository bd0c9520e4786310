#include <doctest.h>

#include <chrono>
#include <cmath>

#include "fedlap/kernels.hpp"
#include "fedlap/spectral.hpp"
#include "support/oracles.hpp"

using namespace fedlap;

namespace {

void check_factorization(const Laplacian& l, const ArnoldiFactorization& f) {
  const int n = l.size();
  const int m = f.steps();
  const double lf = std::max(l.frobenius_norm(), 1e-300);
  // orthonormality
  Eigen::MatrixXd gram = f.q.transpose() * f.q - Eigen::MatrixXd::Identity(m, m);
  CHECK(gram.norm() <= 1e-8);
  // Arnoldi relation
  Eigen::MatrixXd lq(n, m);
  Eigen::VectorXd col(n), out(n);
  for (int j = 0; j < m; ++j) {
    col = f.q.col(j);
    l.apply(col, out);
    lq.col(j) = out;
  }
  Eigen::MatrixXd resid = lq - f.q * f.h;
  if (f.residual_norm > 0.0) resid.col(m - 1) -= f.residual_norm * f.next_vector;
  CHECK(resid.norm() <= 1e-8 * lf);
  // symmetric operator: H numerically tridiagonal
  for (int i = 0; i < m; ++i)
    for (int j = i + 2; j < m; ++j) CHECK(std::abs(f.h(i, j)) <= 1e-8);
}

}  // namespace

TEST_CASE("arnoldi: identity operator terminates at one step") {
  auto ident = [](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y = x; };
  Eigen::VectorXd x0 = Eigen::VectorXd::Random(5);
  auto f = arnoldi(ident, 5, 3, x0, std::sqrt(5.0));
  CHECK(f.steps() == 1);
  CHECK(f.h(0, 0) == doctest::Approx(1.0));
  CHECK(f.residual_norm == 0.0);
  CHECK(f.next_vector.size() == 0);
}

TEST_CASE("arnoldi: rejects bad inputs") {
  auto ident = [](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y = x; };
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  CHECK_THROWS_AS(arnoldi(ident, 4, 2, zero), std::invalid_argument);
  Eigen::VectorXd x0 = Eigen::VectorXd::Ones(4);
  CHECK_THROWS_AS(arnoldi(ident, 4, 5, x0), std::invalid_argument);
}

TEST_CASE("arnoldi: K3 from e1, two steps reach the {0,3} Ritz pair") {
  Laplacian l(oracle::triangle_graph());
  Eigen::VectorXd x0(3);
  x0 << 1, 0, 0;
  auto f = arnoldi(l, 2, x0);
  check_factorization(l, f);
  auto eig = hessenberg_eig(f.h);
  CHECK(eig.values[0] == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(eig.values[1] == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("arnoldi: full run reproduces the dense spectrum") {
  for (std::uint64_t seed : {1ull, 2ull}) {
    auto g = oracle::random_connected_graph(40, 0.08, seed);
    Laplacian l(g);
    auto f = arnoldi(l, 40, arnoldi_start_vector(40, seed));
    check_factorization(l, f);
    auto ritz = hessenberg_eig(f.h);
    auto dense = oracle::laplacian_eig(l);
    const int m = f.steps();
    if (m == 40) {
      for (int i = 0; i < 40; ++i)
        CHECK(ritz.values[i] == doctest::Approx(dense.values[i]).epsilon(1e-6));
    }
  }
}

TEST_CASE("hessenberg_eig: diagonal input is a permutation") {
  Eigen::MatrixXd h = Eigen::Vector3d(3, 1, 2).asDiagonal();
  auto eig = hessenberg_eig(h);
  CHECK(eig.values[0] == doctest::Approx(1.0));
  CHECK(eig.values[1] == doctest::Approx(2.0));
  CHECK(eig.values[2] == doctest::Approx(3.0));
  // permutation columns: |v| has a single unit entry
  for (int j = 0; j < 3; ++j) {
    CHECK(eig.vectors.col(j).cwiseAbs().maxCoeff() == doctest::Approx(1.0));
    CHECK(eig.vectors.col(j).norm() == doctest::Approx(1.0));
  }
}

TEST_CASE("hessenberg_eig: hand 2x2 eigensolve") {
  Eigen::MatrixXd h(2, 2);
  h << 2, -1, -1, 2;
  auto eig = hessenberg_eig(h);
  CHECK(eig.values[0] == doctest::Approx(1.0));
  CHECK(eig.values[1] == doctest::Approx(3.0));
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(eig.vectors.col(0).dot(Eigen::Vector2d(inv_sqrt2, inv_sqrt2))) ==
        doctest::Approx(1.0));
  CHECK(std::abs(eig.vectors.col(1).dot(Eigen::Vector2d(inv_sqrt2, -inv_sqrt2))) ==
        doctest::Approx(1.0));
}

TEST_CASE("hessenberg_eig: random tridiagonal matches dense oracle") {
  Rng rng(33);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(20, 20);
  for (int i = 0; i < 20; ++i) h(i, i) = 2.0 * rng.normal();
  for (int i = 0; i + 1 < 20; ++i) {
    const double off = rng.normal();
    h(i + 1, i) = off;
    h(i, i + 1) = off;
  }
  auto mine = hessenberg_eig(h);
  auto ref = oracle::dense_eig(h);
  const double hf = h.norm();
  for (int i = 0; i < 20; ++i)
    CHECK(std::abs(mine.values[i] - ref.values[i]) <= 1e-9 * hf);
  CHECK((h * mine.vectors - mine.vectors * mine.values.asDiagonal()).norm() <= 1e-9 * hf);
  CHECK((mine.vectors.transpose() * mine.vectors - Eigen::MatrixXd::Identity(20, 20)).norm() <=
        1e-10);
}

TEST_CASE("hessenberg_eig: asymmetry rejected") {
  Eigen::MatrixXd h(2, 2);
  h << 1, 5, 0, 1;
  CHECK_THROWS_AS(hessenberg_eig(h), std::invalid_argument);
}

TEST_CASE("spectral_basis: full rank reconstructs L, truncation keeps the smooth end") {
  auto g = oracle::random_connected_graph(30, 0.1, 5);
  Laplacian l(g);
  auto f = arnoldi(l, 30, arnoldi_start_vector(30, 5));
  const int m = f.steps();
  auto basis = spectral_basis(f, m);
  CHECK((basis.u.transpose() * basis.u - Eigen::MatrixXd::Identity(m, m)).norm() <= 1e-6);
  Eigen::MatrixXd rec = basis.u * basis.lambda.asDiagonal() * basis.u.transpose();
  const double lf = l.frobenius_norm();
  CHECK((rec - l.dense()).norm() / lf <= f.residual_norm / lf + 1e-6);
  // connected graph: lambda_1 ~ 0 and u_1 proportional to 1/sqrt(n)
  CHECK(basis.lambda[0] <= 1e-6);
  Eigen::VectorXd ones = Eigen::VectorXd::Constant(30, 1.0 / std::sqrt(30.0));
  CHECK(std::abs(basis.u.col(0).dot(ones)) > 1.0 - 1e-6);
  CHECK_THROWS_AS(spectral_basis(f, m + 1), std::invalid_argument);
}

TEST_CASE("spectral_basis: K3 r=2 keeps {0,3}") {
  Laplacian l(oracle::triangle_graph());
  Eigen::VectorXd x0(3);
  x0 << 1, 0, 0;
  auto f = arnoldi(l, 2, x0);
  auto basis = spectral_basis(f, 2);
  CHECK(basis.lambda[0] == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(basis.lambda[1] == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("reconstruct_adjacency: exact at full rank on P3") {
  Laplacian l(oracle::path3_graph());
  auto dense = oracle::laplacian_eig(l);
  SpectralBasis basis{dense.vectors, dense.values};
  Eigen::MatrixXd rec = reconstruct_adjacency(basis, l.degrees());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 3);
  for (auto [u, v] : l.graph().edges()) {
    a(u, v) = 1;
    a(v, u) = 1;
  }
  CHECK((rec - a).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("reconstruct_adjacency: r=1 on a connected graph is close to D") {
  auto g = oracle::random_connected_graph(20, 0.1, 9);
  Laplacian l(g);
  auto f = arnoldi(l, 20, arnoldi_start_vector(20, 9));
  auto basis = spectral_basis(f, 1);
  Eigen::MatrixXd rec = reconstruct_adjacency(basis, l.degrees());
  Eigen::MatrixXd d = l.degrees().cast<double>().asDiagonal();
  CHECK((rec - d).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("reconstruct_adjacency: SBM blocks brighter inside than across") {
  Graph g = sbm_generate({50, 50}, 0.2, 0.02, 31, false);
  auto gp = std::make_shared<Graph>(std::move(g));
  Laplacian l(gp);
  auto eig = oracle::laplacian_eig(l);
  SpectralBasis basis{eig.vectors.leftCols(4), eig.values.head(4)};
  Eigen::MatrixXd rec = reconstruct_adjacency(basis, l.degrees());
  // block submatrix means, i.e. the brightness contrast visible in a heatmap
  double within = 0.0, across = 0.0;
  int nw = 0, na = 0;
  for (int u = 0; u < 100; ++u)
    for (int v = 0; v < 100; ++v) {
      const bool same = (u < 50) == (v < 50);
      (same ? within : across) += rec(u, v);
      ++(same ? nw : na);
    }
  CHECK(within / nw > across / na);
}

TEST_CASE("rayleigh_quotient: null space, top eigenvector, bounds") {
  auto g = oracle::random_connected_graph(25, 0.15, 12);
  Laplacian l(g);
  auto eig = oracle::laplacian_eig(l);

  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(25, 1);
  CHECK(rayleigh_quotient(l, ones) == doctest::Approx(0.0).epsilon(1e-12));

  Eigen::MatrixXd top = eig.vectors.col(24);
  CHECK(rayleigh_quotient(l, top) == doctest::Approx(eig.values[24]).epsilon(1e-8));

  Rng rng(77);
  for (int t = 0; t < 10; ++t) {
    Eigen::MatrixXd s(25, 3);
    for (int i = 0; i < 25; ++i)
      for (int j = 0; j < 3; ++j) s(i, j) = rng.normal();
    const double rq = rayleigh_quotient(l, s);
    CHECK(rq >= eig.values[0] - 1e-9);
    CHECK(rq <= eig.values[24] + 1e-9);
  }
  CHECK_THROWS_AS(rayleigh_quotient(l, Eigen::MatrixXd::Zero(25, 2)), std::invalid_argument);
}

TEST_CASE("rayleigh_quotient: edge and trace forms agree on random pairs") {
  Rng rng(123);
  for (int t = 0; t < 100; ++t) {
    const int n = 5 + static_cast<int>(rng.uniform_below(20));
    auto g = oracle::random_connected_graph(n, 0.2, 1000 + t);
    Laplacian l(g);
    Eigen::MatrixXd s(n, 2);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 2; ++j) s(i, j) = rng.normal();
    CHECK_NOTHROW(rayleigh_quotient(l, s));  // internal cross-check at 1e-9
  }
}

TEST_CASE("spectral vs spatial regularizer equality through S = U W") {
  auto g = oracle::random_connected_graph(20, 0.15, 8);
  Laplacian l(g);
  auto eig = oracle::laplacian_eig(l);
  Rng rng(5);
  Eigen::MatrixXd w(20, 3);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 3; ++j) w(i, j) = rng.normal();
  const double spectral =
      (w.transpose() * eig.values.asDiagonal() * w).trace() / (w.transpose() * w).trace();
  const double spatial = rayleigh_quotient(l, eig.vectors * w);
  CHECK(spectral == doctest::Approx(spatial).epsilon(1e-8));
}

TEST_CASE("kernels: serial and parallel paths agree bit for bit") {
  auto g = oracle::random_connected_graph(500, 0.01, 44);
  Laplacian l(g);
  Rng rng(4);
  Eigen::VectorXd x(500);
  for (int i = 0; i < 500; ++i) x[i] = rng.normal();

  Eigen::VectorXd ys(500), yp(500);
  l.apply(x, ys, kernels::Exec::Serial);
  l.apply(x, yp, kernels::Exec::Parallel);
  CHECK(ys == yp);

  CHECK(kernels::dot(x.data(), ys.data(), 500, kernels::Exec::Serial) ==
        kernels::dot(x.data(), ys.data(), 500, kernels::Exec::Parallel));

  Eigen::MatrixXd q = Eigen::MatrixXd::Random(500, 8);
  Eigen::VectorXd hs, hp;
  kernels::project(q, 8, x, hs, kernels::Exec::Serial);
  kernels::project(q, 8, x, hp, kernels::Exec::Parallel);
  CHECK(hs == hp);

  Eigen::VectorXd ws = x, wp = x;
  kernels::subtract_projection(q, 8, hs, ws, kernels::Exec::Serial);
  kernels::subtract_projection(q, 8, hp, wp, kernels::Exec::Parallel);
  CHECK(ws == wp);
}

TEST_CASE("arnoldi cost grows linearly in n at fixed rank") {
  // timing slope over a 16x range of n; generous bounds keep this stable
  const int r = 24;
  auto time_run = [&](int n) {
    auto g = oracle::random_connected_graph(n, 4.0 / n, 99);
    Laplacian l(g);
    Eigen::VectorXd x0 = arnoldi_start_vector(n, 1);
    double best = 1e100;
    for (int rep = 0; rep < 3; ++rep) {
      auto t0 = std::chrono::steady_clock::now();
      auto f = arnoldi(l, r, x0);
      auto t1 = std::chrono::steady_clock::now();
      (void)f;
      best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
  };
  const double t1k = time_run(1000);
  const double t16k = time_run(16000);
  const double ratio = t16k / std::max(t1k, 1e-9);
  // ideal O(n r^2) ratio is 16; quadratic-in-n would be 256
  CHECK(ratio < 80.0);
}
