#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "fedlap/fednet.hpp"
#include "support/oracles.hpp"

using namespace fedlap;

namespace {

std::vector<PartitionedView> split(std::shared_ptr<const Graph> g, int k, std::uint64_t seed) {
  return partition(std::move(g), PartitionScheme::Random, k, seed);
}

std::vector<Eigen::VectorXd> scatter(const std::vector<PartitionedView>& views,
                                     const Eigen::VectorXd& x) {
  std::vector<Eigen::VectorXd> blocks(views.size());
  for (size_t i = 0; i < views.size(); ++i) {
    blocks[i].resize(views[i].size());
    for (int u = 0; u < views[i].size(); ++u) blocks[i][u] = x[views[i].internal_nodes[u]];
  }
  return blocks;
}

Eigen::VectorXd gather(const std::vector<PartitionedView>& views,
                       const std::vector<Eigen::VectorXd>& blocks) {
  int n = 0;
  for (const auto& view : views) n += view.size();
  Eigen::VectorXd x(n);
  for (size_t i = 0; i < views.size(); ++i)
    for (int u = 0; u < views[i].size(); ++u) x[views[i].internal_nodes[u]] = blocks[i][u];
  return x;
}

}  // namespace

TEST_CASE("ciphertext: round trip and additive homomorphism, both backends") {
  AggregationGroup group{0, {0, 1, 2}};
  for (Backend backend : {Backend::Mock, Backend::Mask}) {
    SecureAggregator agg(backend, 77);
    std::vector<double> a{1.5, -2.25, 3.0}, b{0.5, 0.25, -1.0}, c{10.0, 0.0, 4.5};
    Ciphertext ca = agg.encrypt(a, group, 0, 1);
    Ciphertext cb = agg.encrypt(b, group, 1, 1);
    Ciphertext cc = agg.encrypt(c, group, 2, 1);
    // commutative and associative up to backend tolerance
    auto s1 = agg.decrypt_aggregate(agg.add(agg.add(ca, cb), cc));
    auto s2 = agg.decrypt_aggregate(agg.add(cc, agg.add(cb, ca)));
    for (int i = 0; i < 3; ++i) {
      CHECK(s1[i] == doctest::Approx(a[i] + b[i] + c[i]).epsilon(1e-9));
      CHECK(s1[i] == doctest::Approx(s2[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("mask backend: a single masked ciphertext reveals nothing close to its value") {
  AggregationGroup group{0, {0, 1}};
  SecureAggregator agg(Backend::Mask, 41);
  std::vector<double> v{1.0, 2.0};
  Ciphertext ct = agg.encrypt(v, group, 0, 9);
  auto leaked = agg.decrypt_aggregate(ct);  // still masked: not the plaintext
  CHECK(std::abs(leaked[0] - 1.0) > 1e-3);
}

TEST_CASE("secure_sum: basics, identity, withheld aggregate, length mismatch") {
  FedContext ctx(Backend::Mock, 5);
  AggregationGroup group{0, {0, 1}};
  std::map<int, std::vector<double>> contribs{{0, {1.0, 2.0}}, {1, {3.0, 4.0}}};
  auto sum = secure_sum(ctx, group, contribs, "test", {0, 1});
  CHECK(sum == std::vector<double>{4.0, 6.0});

  AggregationGroup solo{1, {7}};
  std::map<int, std::vector<double>> one{{7, {5.0, 6.0}}};
  CHECK(secure_sum(ctx, solo, one, "solo", {7}) == std::vector<double>{5.0, 6.0});

  std::map<int, std::vector<double>> missing{{0, {1.0}}};
  CHECK_THROWS_WITH_AS(secure_sum(ctx, group, missing, "test", {0}),
                       doctest::Contains("aggregate withheld"), std::invalid_argument);

  std::map<int, std::vector<double>> ragged{{0, {1.0, 2.0}}, {1, {3.0}}};
  CHECK_THROWS_AS(secure_sum(ctx, group, ragged, "test", {0}), std::invalid_argument);
}

TEST_CASE("secure_sum: masking backend matches plaintext within 1e-6") {
  Rng rng(31);
  FedContext ctx(Backend::Mask, 31);
  AggregationGroup group{0, {0, 1, 2, 3, 4}};
  std::map<int, std::vector<double>> contribs;
  std::vector<double> expected(100, 0.0);
  for (int m = 0; m < 5; ++m) {
    std::vector<double> v(100);
    for (auto& x : v) x = 10.0 * rng.normal();
    for (int i = 0; i < 100; ++i) expected[i] += v[i];
    contribs[m] = std::move(v);
  }
  auto sum = secure_sum(ctx, group, contribs, "mask", {0});
  for (int i = 0; i < 100; ++i) CHECK(std::abs(sum[i] - expected[i]) <= 1e-6);
  // transcript: one ciphertext per member plus one aggregate per recipient
  CHECK(ctx.transcript.log.size() == 6);
}

TEST_CASE("distributed_matvec: all-ones is in the null space for any K") {
  auto g = std::make_shared<Graph>(sbm_generate({20, 20}, 0.2, 0.05, 3, false));
  for (int k : {1, 2, 5}) {
    auto views = split(g, k, 17);
    FedContext ctx(Backend::Mock, 2);
    auto b = distributed_matvec(ctx, views, scatter(views, Eigen::VectorXd::Ones(40)));
    CHECK(gather(views, b).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("distributed_matvec: K=1 equals the local sparse matvec with no messages") {
  auto g = oracle::random_connected_graph(30, 0.1, 4);
  auto views = split(g, 1, 1);
  Laplacian l(g);
  Eigen::VectorXd x = arnoldi_start_vector(30, 8);
  FedContext ctx(Backend::Mock, 3);
  auto b = distributed_matvec(ctx, views, scatter(views, x));
  Eigen::VectorXd expect = l.apply(x);
  CHECK(gather(views, b) == expect);
  CHECK(ctx.transcript.log.empty());
}

TEST_CASE("distributed_matvec: K3 one-hot gives the hand-computed column") {
  auto g = oracle::triangle_graph();
  auto views = split(g, 3, 7);
  Eigen::VectorXd e0 = Eigen::VectorXd::Zero(3);
  e0[0] = 1.0;
  FedContext ctx(Backend::Mock, 4);
  auto b = distributed_matvec(ctx, views, scatter(views, e0));
  Eigen::VectorXd full = gather(views, b);
  CHECK(full[0] == doctest::Approx(2.0));
  CHECK(full[1] == doctest::Approx(-1.0));
  CHECK(full[2] == doctest::Approx(-1.0));
}

TEST_CASE("distributed_matvec: matches L q within 1e-9 on random graphs") {
  auto g = std::make_shared<Graph>(bernoulli_graph(120, 0.06, 21));
  Laplacian l(g);
  Eigen::VectorXd x = arnoldi_start_vector(120, 5);
  for (int k : {2, 3, 7}) {
    auto views = split(g, k, 100 + k);
    FedContext ctx(Backend::Mock, 6);
    auto b = distributed_matvec(ctx, views, scatter(views, x));
    CHECK((gather(views, b) - l.apply(x)).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("distributed_matvec: stale partition rejected") {
  auto g = oracle::triangle_graph();
  auto views = split(g, 2, 1);
  FedContext ctx(Backend::Mock, 1);
  std::vector<Eigen::VectorXd> wrong{Eigen::VectorXd::Zero(5), Eigen::VectorXd::Zero(5)};
  CHECK_THROWS_AS(distributed_matvec(ctx, views, wrong), std::invalid_argument);
}

TEST_CASE("distributed inner product and norm") {
  auto g = std::make_shared<Graph>(bernoulli_graph(200, 0.03, 10));
  auto views = split(g, 7, 3);
  Rng rng(12);
  Eigen::VectorXd x(200), y(200);
  for (int i = 0; i < 200; ++i) {
    x[i] = rng.normal();
    y[i] = rng.normal();
  }
  FedContext ctx(Backend::Mock, 11);
  const double ip = distributed_inner_product(ctx, views, scatter(views, x), scatter(views, y));
  CHECK(ip == doctest::Approx(x.dot(y)).epsilon(1e-9));
  const double nrm = distributed_norm(ctx, views, scatter(views, x));
  CHECK(nrm == doctest::Approx(x.norm()).epsilon(1e-9));

  // unit vector split anyhow
  Eigen::VectorXd e0 = Eigen::VectorXd::Zero(200);
  e0[0] = 1.0;
  CHECK(distributed_inner_product(ctx, views, scatter(views, e0), scatter(views, e0)) ==
        doctest::Approx(1.0));
  // orthogonal blocks
  Eigen::VectorXd e9 = Eigen::VectorXd::Zero(200);
  e9[9] = 1.0;
  CHECK(distributed_inner_product(ctx, views, scatter(views, e0), scatter(views, e9)) ==
        doctest::Approx(0.0));
}

TEST_CASE("decentralized_arnoldi: K=1 is bit-identical to centralized") {
  auto g = oracle::random_connected_graph(50, 0.08, 6);
  Laplacian l(g);
  const std::uint64_t seed = 99;
  auto cen = arnoldi(l, 12, arnoldi_start_vector(50, seed));
  auto views = split(g, 1, 1);
  auto dec = decentralized_arnoldi(views, 12, seed, Backend::Mock);
  REQUIRE(dec.steps() == cen.steps());
  CHECK(dec.h == cen.h);
  CHECK(dec.q_blocks[0] == cen.q);
  CHECK(dec.residual_norm == cen.residual_norm);
}

TEST_CASE("decentralized_arnoldi: K3 over 3 clients recovers {0,3}") {
  auto g = oracle::triangle_graph();
  auto views = split(g, 3, 7);
  auto dec = decentralized_arnoldi(views, 2, 13, Backend::Mock);
  auto eig = hessenberg_eig(dec.h);
  CHECK(eig.values[0] == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(eig.values[1] == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("decentralized_arnoldi: matches centralized H and Q across K, backends") {
  auto g = std::make_shared<Graph>(sbm_generate({100, 100, 100}, 0.05, 0.01, 8, false));
  Laplacian l(g);
  const std::uint64_t seed = 41;
  auto cen = arnoldi(l, 20, arnoldi_start_vector(300, seed));
  for (int k : {2, 5}) {
    auto views = split(g, k, 50 + k);
    auto mock = decentralized_arnoldi(views, 20, seed, Backend::Mock);
    REQUIRE(mock.steps() == cen.steps());
    CHECK((mock.h - cen.h).norm() <= 1e-9);
    Eigen::MatrixXd q_full(300, mock.steps());
    for (size_t i = 0; i < views.size(); ++i)
      for (int u = 0; u < views[i].size(); ++u)
        q_full.row(views[i].internal_nodes[u]) = mock.q_blocks[i].row(u);
    CHECK((q_full - cen.q).norm() <= 1e-9);

    auto masked = decentralized_arnoldi(views, 20, seed, Backend::Mask);
    CHECK((masked.h - cen.h).norm() <= 1e-5);
  }
}

TEST_CASE("decentralized_arnoldi: invariant subspace early return matches centralized") {
  // two disjoint triangles: Krylov space from any start has dimension <= 4
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(6, 1);
  auto g = std::make_shared<Graph>(
      build_graph({{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}}, f));
  Laplacian l(g);
  const std::uint64_t seed = 3;
  auto cen = arnoldi(l, 6, arnoldi_start_vector(6, seed));
  CHECK(cen.steps() < 6);
  CHECK(cen.residual_norm == 0.0);
  auto views = split(g, 2, 5);
  auto dec = decentralized_arnoldi(views, 6, seed, Backend::Mock);
  CHECK(dec.steps() == cen.steps());
  CHECK(dec.residual_norm == 0.0);
  CHECK((dec.h - cen.h).norm() <= 1e-9);
}

TEST_CASE("decentralized_arnoldi: deterministic replay hashes") {
  auto g = std::make_shared<Graph>(bernoulli_graph(80, 0.05, 14));
  auto views = split(g, 4, 9);
  for (Backend backend : {Backend::Mock, Backend::Mask}) {
    Transcript t1, t2;
    auto a = decentralized_arnoldi(views, 8, 21, backend, &t1);
    auto b = decentralized_arnoldi(views, 8, 21, backend, &t2);
    CHECK(a.h == b.h);
    CHECK(t1.hash() == t2.hash());
    CHECK(!t1.log.empty());
  }
}

TEST_CASE("client_bases + assemble_basis: per-client rows reproduce the global basis") {
  auto g = std::make_shared<Graph>(sbm_generate({40, 40}, 0.15, 0.02, 12, false));
  auto views = split(g, 3, 2);
  auto dec = decentralized_arnoldi(views, 10, 33, Backend::Mock);
  auto bases = client_bases(dec, 5);
  for (size_t i = 0; i < views.size(); ++i) {
    CHECK(bases[i].u_rows.rows() == views[i].size());
    CHECK(bases[i].u_rows.cols() == 5);
  }
  SpectralBasis full = assemble_basis(views, bases);
  CHECK(full.u.rows() == 80);
  CHECK(full.lambda.size() == 5);
  // ascending eigenvalues, smallest near zero for this connected-enough graph
  for (int j = 1; j < 5; ++j) CHECK(full.lambda[j] >= full.lambda[j - 1]);
}

TEST_CASE("knowledge confinement: audit passes and server view is empty") {
  auto g = std::make_shared<Graph>(sbm_generate({50, 50}, 0.1, 0.02, 18, false));
  for (int k : {2, 4}) {
    auto views = split(g, k, 77 + k);
    Transcript transcript;
    auto dec = decentralized_arnoldi(views, 10, 55, Backend::Mock, &transcript);
    auto report = audit_confinement(transcript, dec.q_blocks);
    for (const auto& v : report.violations) MESSAGE(v);
    CHECK(report.ok);
    CHECK(transcript.decrypted_views.count(-1) == 0);
  }
}

TEST_CASE("comm accounting: counts follow r*K*n, K=1 has no cross terms") {
  auto run_total = [](int n, int k, int r) {
    auto g = std::make_shared<Graph>(bernoulli_graph(n, 8.0 / n, 70));
    auto views = partition(g, PartitionScheme::Random, k, 4);
    Transcript transcript;
    decentralized_arnoldi(views, r, 12, Backend::Mock, &transcript);
    return total_scalars(transcript);
  };

  CHECK(run_total(60, 1, 6) == 0);  // degenerate federation: no messages at all

  const long base = run_total(500, 10, 5);
  const double r_ratio = static_cast<double>(run_total(500, 10, 10)) / base;
  const double k_ratio = static_cast<double>(run_total(500, 20, 5)) / base;
  const double n_ratio = static_cast<double>(run_total(1000, 10, 5)) / base;
  CHECK(r_ratio >= 1.9);
  CHECK(r_ratio <= 2.1);
  CHECK(k_ratio >= 1.9);
  CHECK(k_ratio <= 2.1);
  CHECK(n_ratio >= 1.9);
  CHECK(n_ratio <= 2.1);

  // fitted leading coefficient over a 3x3x3 grid stays in a tight band
  std::vector<RknSample> samples;
  for (int n : {200, 400, 600})
    for (int k : {2, 4, 6})
      for (int r : {4, 6, 8})
        samples.push_back({r, k, n, run_total(n, k, r)});
  const double c = fit_rkn_coefficient(samples);
  CHECK(c > 0.5);
  CHECK(c < 2.0);
  for (const auto& s : samples) {
    const double predicted = c * s.r * s.k * s.n;
    CHECK(std::abs(predicted - s.scalars) / s.scalars < 0.35);
  }
}

TEST_CASE("backend swap invariance on a grid of graphs") {
  for (std::uint64_t seed : {1ull, 2ull}) {
    auto g = std::make_shared<Graph>(bernoulli_graph(90, 0.07, seed));
    auto views = split(g, 3, seed);
    auto mock = decentralized_arnoldi(views, 8, 5, Backend::Mock);
    auto mask = decentralized_arnoldi(views, 8, 5, Backend::Mask);
    REQUIRE(mock.steps() == mask.steps());
    CHECK((mock.h - mask.h).norm() <= 1e-5);
  }
}

TEST_CASE("transcript: jsonl export is one message per line") {
  auto g = oracle::triangle_graph();
  auto views = split(g, 3, 7);
  Transcript transcript;
  decentralized_arnoldi(views, 2, 1, Backend::Mock, &transcript);
  const std::string path = "/tmp/fedlap_transcript_test.jsonl";
  transcript.write_jsonl(path);
  std::ifstream in(path);
  std::string line;
  size_t lines = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++lines;
  CHECK(lines == transcript.log.size());
  std::remove(path.c_str());
}
