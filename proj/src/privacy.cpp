#include "fedlap/privacy.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "fedlap/errors.hpp"
#include "fedlap/fednet.hpp"
#include "fedlap/graph.hpp"
#include "fedlap/rng.hpp"

namespace fedlap {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// ------------------------------------------------------------------- theory

LlrTheory LlrTheory::from_estimate(const Eigen::MatrixXd& q_est, double p) {
  if (q_est.rows() == 0) throw std::invalid_argument("LlrTheory: empty basis estimate");
  LlrTheory theory;
  theory.mu = p * q_est.colwise().sum();  // p * 1^T Q
  theory.sigma = p * (1.0 - p) * (q_est.transpose() * q_est);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(theory.sigma);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    theory.sigma += 1e-10 * Eigen::MatrixXd::Identity(theory.sigma.rows(), theory.sigma.cols());
    ldlt.compute(theory.sigma);
    if (ldlt.info() != Eigen::Success)
      throw NumericError("LlrTheory: covariance singular beyond regularization");
  }
  theory.sigma_inv_qt = ldlt.solve(q_est.transpose());
  theory.alpha.resize(q_est.rows());
  for (Eigen::Index v = 0; v < q_est.rows(); ++v)
    theory.alpha[v] = q_est.row(v) * theory.sigma_inv_qt.col(v);
  return theory;
}

Eigen::MatrixXd attacker_observable(const Eigen::MatrixXd& a_block,
                                    const Eigen::MatrixXd& q_block) {
  if (a_block.cols() != q_block.rows())
    throw std::invalid_argument("attacker_observable: shape mismatch");
  return a_block * q_block;
}

Eigen::MatrixXd attacker_observable(const Eigen::VectorXd& target_degrees,
                                    const Eigen::MatrixXd& q_est,
                                    const Eigen::MatrixXd& a_cross,
                                    const Eigen::MatrixXd& q_other, const Eigen::MatrixXd& h) {
  if (target_degrees.size() != q_est.rows() || a_cross.rows() != q_est.rows() ||
      a_cross.cols() != q_other.rows() || h.rows() != q_est.cols())
    throw std::invalid_argument("attacker_observable: shape mismatch");
  // Arnoldi relation restricted to the target rows:
  //   A_11 Q_1 = D_11 Q_1 - A_12 Q_2 - Q_1 H - residual
  return target_degrees.asDiagonal() * q_est - a_cross * q_other - q_est * h;
}

double llr(const Eigen::MatrixXd& u, const LlrTheory& theory, const Eigen::MatrixXd& q_est,
           int node_u, int node_v) {
  const Eigen::RowVectorXd centered =
      u.row(node_u) - theory.mu + 0.5 * q_est.row(node_v);
  return centered * theory.sigma_inv_qt.col(node_v);
}

namespace {

CurvePoint theory_point(double gamma, double alpha, double p) {
  const double sa = std::sqrt(alpha);
  const double tpr = 1.0 - normal_cdf((gamma - 0.5 * alpha) / sa);
  const double fpr = 1.0 - normal_cdf((gamma + 0.5 * alpha) / sa);
  const double denom = p * tpr + (1.0 - p) * fpr;
  const double precision = denom > 0.0 ? p * tpr / denom : 1.0;
  return {gamma, tpr, fpr, precision, tpr};
}

std::vector<double> gamma_grid(double alpha, int points) {
  const double sa = std::sqrt(alpha);
  const double lo = -0.5 * alpha - 5.0 * sa;
  const double hi = 0.5 * alpha + 5.0 * sa;
  std::vector<double> grid(static_cast<size_t>(points));
  for (int i = 0; i < points; ++i)
    grid[static_cast<size_t>(i)] = lo + (hi - lo) * i / (points - 1);
  return grid;
}

}  // namespace

std::vector<CurvePoint> theory_curves(const AttackSetting& setting, int grid_points) {
  double alpha;
  if (setting.q_est.size() > 0) {
    alpha = LlrTheory::from_estimate(setting.q_est, setting.p).alpha.mean();
  } else {
    alpha = static_cast<double>(setting.r) / (setting.n * setting.p * (1.0 - setting.p));
  }
  if (!(alpha > 0.0)) throw std::invalid_argument("theory_curves: alpha must be positive");
  std::vector<CurvePoint> curve;
  curve.reserve(static_cast<size_t>(grid_points));
  for (double gamma : gamma_grid(alpha, grid_points))
    curve.push_back(theory_point(gamma, alpha, setting.p));
  return curve;
}

double kl_gap(int r, int n, double p) {
  if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("kl_gap: p outside (0,1)");
  return static_cast<double>(r) / (2.0 * n * p * (1.0 - p));
}

double kl_gap_exact(const Eigen::MatrixXd& q_est, double p, int node_v) {
  return 0.5 * LlrTheory::from_estimate(q_est, p).alpha[node_v];
}

TheoremCheck validate_llr_theory(const Eigen::MatrixXd& q_est, double p, int node_v,
                                 int samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("validate_llr_theory: need samples >= 1");
  const int n = static_cast<int>(q_est.rows());
  LlrTheory theory = LlrTheory::from_estimate(q_est, p);
  TheoremCheck check;
  check.alpha = theory.alpha[node_v];
  check.samples = samples;

  const Eigen::VectorXd w = theory.sigma_inv_qt.col(node_v);  // Sigma^{-1} q_v^T
  const Eigen::VectorXd coeff = q_est * w;                    // per-entry LLR weights
  const double base = -theory.mu.dot(w) + 0.5 * coeff[node_v];
  const double shift_v = coeff[node_v];  // the H0 observable lacks q_v
  std::vector<double> h1(static_cast<size_t>(samples)), h0(static_cast<size_t>(samples));
  std::vector<double> standardized;
  standardized.reserve(2 * static_cast<size_t>(samples));
  const double sa = std::sqrt(check.alpha);

#pragma omp parallel for schedule(static)
  for (int t = 0; t < samples; ++t) {
    Rng rng(derive_seed(seed, "llr-mc", static_cast<std::uint64_t>(t)));
    // untested entries are Bernoulli(p); the tested entry sits at its prior
    // mean p*q_v, the centering Theorem 1's N(mu, Sigma) pair encodes. The
    // hypotheses then differ by the q_v shift.
    double dot = p * coeff[node_v];
    for (int i = 0; i < n; ++i)
      if (i != node_v && rng.bernoulli(p)) dot += coeff[i];
    h1[static_cast<size_t>(t)] = dot + base;
    h0[static_cast<size_t>(t)] = dot - shift_v + base;
  }
  double m1 = 0.0, m0 = 0.0, v1 = 0.0;
  for (int t = 0; t < samples; ++t) {
    m1 += h1[static_cast<size_t>(t)];
    m0 += h0[static_cast<size_t>(t)];
  }
  m1 /= samples;
  m0 /= samples;
  for (int t = 0; t < samples; ++t) {
    const double d = h1[static_cast<size_t>(t)] - m1;
    v1 += d * d;
    standardized.push_back((h1[static_cast<size_t>(t)] - 0.5 * check.alpha) / sa);
    standardized.push_back((h0[static_cast<size_t>(t)] + 0.5 * check.alpha) / sa);
  }
  check.mean_h1 = m1;
  check.mean_h0 = m0;
  check.var_h1 = v1 / samples;
  check.ks = ks_to_standard_normal(std::move(standardized));
  return check;
}

double ks_to_standard_normal(std::vector<double> samples) {
  if (samples.empty()) return 1.0;
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double ks = 0.0;
  for (size_t i = 0; i < samples.size(); ++i) {
    const double cdf = normal_cdf(samples[i]);
    ks = std::max(ks, std::abs((static_cast<double>(i) + 1.0) / n - cdf));
    ks = std::max(ks, std::abs(cdf - static_cast<double>(i) / n));
  }
  return ks;
}

// -------------------------------------------------------------- empirical

namespace {

std::vector<CurvePoint> empirical_curve(const std::vector<double>& pos_llr,
                                        const std::vector<double>& neg_llr, double alpha,
                                        double p, int grid_points) {
  std::vector<double> pos = pos_llr, neg = neg_llr;
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  auto frac_at_least = [](const std::vector<double>& sorted, double gamma) {
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), gamma);
    return static_cast<double>(sorted.end() - it) / static_cast<double>(sorted.size());
  };
  std::vector<CurvePoint> curve;
  for (double gamma : gamma_grid(alpha, grid_points)) {
    const double tpr = frac_at_least(pos, gamma);
    const double fpr = frac_at_least(neg, gamma);
    // importance reweighting by the class prior p: the negative sample is
    // uniform but the true pair population is (1-p) negative
    const double denom = p * tpr + (1.0 - p) * fpr;
    const double precision = denom > 0.0 ? p * tpr / denom : 1.0;
    curve.push_back({gamma, tpr, fpr, precision, tpr});
  }
  return curve;
}

}  // namespace

AttackRun run_attack(const AttackSetting& setting, int n_attacker, int trials,
                     std::uint64_t seed) {
  const int n1 = setting.n, n2 = n_attacker;
  const double p = setting.p;
  const double p_sample = setting.p_actual > 0.0 ? setting.p_actual : p;
  if (n1 <= 1 || n2 < 1 || setting.r < 1)
    throw std::invalid_argument("run_attack: bad setting");

  // sample until the target holds at least one internal edge
  Graph graph = bernoulli_graph(2, 0.0, 0);
  std::vector<std::pair<int, int>> positives;
  bool found = false;
  for (int attempt = 0; attempt < 5 && !found; ++attempt) {
    graph = bernoulli_graph(n1 + n2, p_sample, derive_seed(seed, "attack-graph", attempt));
    positives.clear();
    for (auto [u, v] : graph.edges())
      if (u < n1 && v < n1) positives.emplace_back(u, v);
    found = !positives.empty();
  }
  if (!found) throw NumericError("run_attack: degenerate sampling, no positive pairs");

  auto gp = std::make_shared<Graph>(std::move(graph));
  std::vector<int> assignment(static_cast<size_t>(n1 + n2), 1);
  for (int v = 0; v < n1; ++v) assignment[static_cast<size_t>(v)] = 0;
  auto views = views_from_assignment(gp, assignment, 2);

  Transcript transcript;
  auto dec = decentralized_arnoldi(views, setting.r, seed, Backend::Mock, &transcript);
  const int r_eff = dec.steps();
  const Eigen::MatrixXd& q1 = dec.q_blocks[0];
  const Eigen::MatrixXd& q2 = dec.q_blocks[1];

  // ---- strong attacker: exact basis rows, favorable equality U = A Q
  Eigen::MatrixXd u_strong = Eigen::MatrixXd::Zero(n1, r_eff);
  for (auto [u, v] : views[0].internal_edges) {
    u_strong.row(u) += q1.row(v);
    u_strong.row(v) += q1.row(u);
  }
  LlrTheory strong_theory = LlrTheory::from_estimate(q1, p);

  // ---- realistic attacker: least-norm basis estimate from its aggregates
  // tau_l = (received matvec aggregate) - A_22 q_2l, so tau = A_21 Q_1
  Eigen::MatrixXd tau(n2, r_eff);
  {
    int l = 0;
    for (const auto& sv : transcript.decrypted_views.at(1)) {
      if (sv.kind != "matvec-agg") continue;
      if (l >= r_eff) break;
      for (int i = 0; i < n2; ++i) tau(i, l) = sv.values[static_cast<size_t>(i)];
      ++l;
    }
    if (l != r_eff) throw NumericError("run_attack: transcript missing matvec aggregates");
    Eigen::MatrixXd own = Eigen::MatrixXd::Zero(n2, r_eff);
    for (auto [u, v] : views[1].internal_edges) {
      own.row(views[1].local(u)) += q2.row(views[1].local(v));
      own.row(views[1].local(v)) += q2.row(views[1].local(u));
    }
    tau -= own;
  }
  Eigen::MatrixXd a21 = Eigen::MatrixXd::Zero(n2, n1);
  for (auto [in, out] : views[1].interconnections) a21(views[1].local(in), out) = 1.0;
  Eigen::MatrixXd q_est = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(a21).solve(tau);

  Eigen::VectorXd d11(n1);
  for (int u = 0; u < n1; ++u) d11[u] = views[0].degree(views[0].local(u));
  Eigen::MatrixXd u_real = attacker_observable(d11, q_est, a21.transpose(), q2, dec.h);
  LlrTheory real_theory = LlrTheory::from_estimate(q_est, p);

  // ---- pair population: all positives plus a uniform negative sample
  const size_t n_pos = positives.size();
  size_t n_neg = std::max(n_pos, static_cast<size_t>(trials) -
                                     std::min(static_cast<size_t>(trials), n_pos));
  const size_t non_edges =
      static_cast<size_t>(n1) * (static_cast<size_t>(n1) - 1) / 2 - n_pos;
  n_neg = std::min(n_neg, non_edges);
  if (n_neg == 0) throw NumericError("run_attack: no negative pairs available");
  std::set<std::pair<int, int>> edge_set(positives.begin(), positives.end());
  std::vector<std::pair<int, int>> negatives;
  Rng rng(derive_seed(seed, "attack-negatives"));
  std::set<std::pair<int, int>> chosen;
  while (negatives.size() < n_neg) {
    int u = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(n1)));
    int v = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(n1)));
    if (u == v) continue;
    auto pr = std::minmax(u, v);
    std::pair<int, int> pair{pr.first, pr.second};
    if (edge_set.count(pair) || !chosen.insert(pair).second) continue;
    negatives.push_back(pair);
  }

  auto evaluate_arm = [&](const Eigen::MatrixXd& u_mat, const LlrTheory& theory,
                          const Eigen::MatrixXd& q) {
    std::pair<std::vector<double>, std::vector<double>> out;
    out.first.resize(n_pos);
    out.second.resize(negatives.size());
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(n_pos); ++i)
      out.first[static_cast<size_t>(i)] =
          llr(u_mat, theory, q, positives[static_cast<size_t>(i)].first,
              positives[static_cast<size_t>(i)].second);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(negatives.size()); ++i)
      out.second[static_cast<size_t>(i)] =
          llr(u_mat, theory, q, negatives[static_cast<size_t>(i)].first,
              negatives[static_cast<size_t>(i)].second);
    return out;
  };

  auto [strong_pos, strong_neg] = evaluate_arm(u_strong, strong_theory, q1);
  auto [real_pos, real_neg] = evaluate_arm(u_real, real_theory, q_est);

  AttackRun run;
  run.alpha_mean = strong_theory.alpha.mean();
  AttackSetting closed = setting;
  closed.q_est.resize(0, 0);
  run.theory = theory_curves(closed);
  run.strong = empirical_curve(strong_pos, strong_neg, run.alpha_mean, p, 201);
  run.realistic = empirical_curve(real_pos, real_neg, real_theory.alpha.mean(), p, 201);
  return run;
}

namespace {

// linear interpolation of field y over field x; curves are monotone in
// recall/tpr/fpr as gamma sweeps, so a single bracket suffices
double interpolate_curve(const std::vector<CurvePoint>& curve, double x,
                         double CurvePoint::*xf, double CurvePoint::*yf) {
  if (curve.empty()) return 0.0;
  for (size_t i = 0; i + 1 < curve.size(); ++i) {
    const double x0 = curve[i].*xf, x1 = curve[i + 1].*xf;
    if ((x >= std::min(x0, x1)) && (x <= std::max(x0, x1))) {
      if (x0 == x1) return curve[i].*yf;
      const double t = (x - x0) / (x1 - x0);
      return curve[i].*yf + t * (curve[i + 1].*yf - curve[i].*yf);
    }
  }
  // outside the grid: nearest end
  const double front_d = std::abs(curve.front().*xf - x);
  const double back_d = std::abs(curve.back().*xf - x);
  return front_d < back_d ? curve.front().*yf : curve.back().*yf;
}

}  // namespace

double precision_at_recall(const std::vector<CurvePoint>& curve, double recall) {
  return interpolate_curve(curve, recall, &CurvePoint::recall, &CurvePoint::precision);
}

double tpr_at_fpr(const std::vector<CurvePoint>& curve, double fpr) {
  return interpolate_curve(curve, fpr, &CurvePoint::fpr, &CurvePoint::tpr);
}

std::vector<SweepRow> r_sweep(const std::vector<std::pair<double, int>>& pairs,
                              const std::vector<int>& r_grid) {
  std::vector<SweepRow> rows;
  for (auto [p, n] : pairs)
    for (int r : r_grid) {
      AttackSetting setting;
      setting.p = p;
      setting.n = n;
      setting.r = r;
      double best = 0.0;
      for (const auto& pt : theory_curves(setting))
        best = std::max(best, pt.precision + pt.recall);
      rows.push_back({p, n, r, best});
    }
  return rows;
}

// ----------------------------------------------------------------------- io

void write_curves_csv(const std::string& path, const std::vector<CurvePoint>& points, double p,
                      int n, int r, const std::string& source, bool append,
                      const std::string& header_comment) {
  std::ofstream out(path, append ? std::ios::app : std::ios::out);
  if (!out) throw MissingArtifactError("cannot write " + path);
  out.precision(10);
  if (!append) {
    if (!header_comment.empty()) out << "# " << header_comment << "\n";
    out << "p,n,r,gamma,tpr,fpr,precision,recall,source\n";
  }
  for (const auto& pt : points)
    out << p << "," << n << "," << r << "," << pt.gamma << "," << pt.tpr << "," << pt.fpr << ","
        << pt.precision << "," << pt.recall << "," << source << "\n";
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows,
                     const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) throw MissingArtifactError("cannot write " + path);
  out.precision(10);
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  out << "p,n,r,max_precision_plus_recall\n";
  for (const auto& row : rows)
    out << row.p << "," << row.n << "," << row.r << "," << row.max_precision_plus_recall << "\n";
}

}  // namespace fedlap
