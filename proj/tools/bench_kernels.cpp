// Benchmark of the Arnoldi hot loops: serial reference vs OpenMP kernels.
// The two paths are bit-identical by construction (blocked reductions); this
// target measures the speedup and double-checks the equality on the way.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>

#include "fedlap/graph.hpp"
#include "fedlap/kernels.hpp"
#include "fedlap/rng.hpp"
#include "fedlap/spectral.hpp"

using namespace fedlap;
using Clock = std::chrono::steady_clock;

namespace {

double time_best_of(int reps, const std::function<void()>& fn) {
  double best = 1e100;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = Clock::now();
    fn();
    const auto t1 = Clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  int n = 200000;
  int r = 32;
  if (argc > 1) n = std::atoi(argv[1]);
  if (argc > 2) r = std::atoi(argv[2]);

  std::printf("kernel benchmark: n=%d r=%d (avg degree ~8)\n", n, r);
  Rng erng(7);
  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<size_t>(4) * n);
  for (int v = 1; v < n; ++v) edges.emplace_back(v - 1, v);
  for (int e = 0; e < 3 * n; ++e) {
    int u = static_cast<int>(erng.uniform_below(n));
    int v = static_cast<int>(erng.uniform_below(n));
    if (u != v) edges.emplace_back(u, v);
  }
  auto g = std::make_shared<Graph>(
      build_graph(edges, Eigen::MatrixXd::Zero(n, 1)));
  Laplacian l(g);

  Rng rng(3);
  Eigen::VectorXd x(n), y(n);
  for (int i = 0; i < n; ++i) x[i] = rng.normal();
  Eigen::MatrixXd q(n, r);
  for (int j = 0; j < r; ++j)
    for (int i = 0; i < n; ++i) q(i, j) = rng.normal();
  Eigen::VectorXd h;

  struct Row {
    const char* name;
    double serial;
    double parallel;
  };
  std::vector<Row> rows;

  {
    Eigen::VectorXd ys(n), yp(n);
    const double ts = time_best_of(5, [&] { l.apply(x, ys, kernels::Exec::Serial); });
    const double tp = time_best_of(5, [&] { l.apply(x, yp, kernels::Exec::Parallel); });
    if (ys != yp) std::printf("MISMATCH in laplacian_matvec\n");
    rows.push_back({"laplacian_matvec", ts, tp});
  }
  {
    double ds = 0, dp = 0;
    const double ts =
        time_best_of(5, [&] { ds = kernels::dot(x.data(), x.data(), n, kernels::Exec::Serial); });
    const double tp = time_best_of(
        5, [&] { dp = kernels::dot(x.data(), x.data(), n, kernels::Exec::Parallel); });
    if (ds != dp) std::printf("MISMATCH in dot\n");
    rows.push_back({"dot", ts, tp});
  }
  {
    Eigen::VectorXd hs, hp;
    const double ts =
        time_best_of(5, [&] { kernels::project(q, r, x, hs, kernels::Exec::Serial); });
    const double tp =
        time_best_of(5, [&] { kernels::project(q, r, x, hp, kernels::Exec::Parallel); });
    if (hs != hp) std::printf("MISMATCH in project\n");
    h = hs;
    rows.push_back({"project", ts, tp});
  }
  {
    Eigen::VectorXd ws = x, wp = x;
    const double ts = time_best_of(
        5, [&] { ws = x; kernels::subtract_projection(q, r, h, ws, kernels::Exec::Serial); });
    const double tp = time_best_of(
        5, [&] { wp = x; kernels::subtract_projection(q, r, h, wp, kernels::Exec::Parallel); });
    if (ws != wp) std::printf("MISMATCH in subtract_projection\n");
    rows.push_back({"subtract_projection", ts, tp});
  }
  {
    Eigen::VectorXd x0 = arnoldi_start_vector(n, 1);
    kernels::set_default_exec(kernels::Exec::Serial);
    Eigen::MatrixXd hs;
    const double ts = time_best_of(2, [&] { hs = arnoldi(l, r, x0).h; });
    kernels::set_default_exec(kernels::Exec::Parallel);
    Eigen::MatrixXd hp;
    const double tp = time_best_of(2, [&] { hp = arnoldi(l, r, x0).h; });
    if (hs != hp) std::printf("MISMATCH in arnoldi\n");
    rows.push_back({"arnoldi (full)", ts, tp});
  }

  std::printf("%-22s %12s %12s %9s\n", "kernel", "serial [ms]", "omp [ms]", "speedup");
  for (const auto& row : rows)
    std::printf("%-22s %12.3f %12.3f %8.2fx\n", row.name, 1e3 * row.serial, 1e3 * row.parallel,
                row.serial / row.parallel);
  return 0;
}
