#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace fedlap {

// Worst-case edge membership inference against the offline phase: two
// clients, the attacker holds the aggregated cross products and tests
// H1: A_uv = 1 against H0: A_uv = 0 with a log-likelihood ratio.

struct AttackSetting {
  int n = 0;          // target-client node count
  double p = 0.0;     // Bernoulli edge probability, known to the attacker
  int r = 0;          // truncation rank
  double gamma = 0.0; // decision threshold
  Eigen::MatrixXd q_est;  // attacker's basis estimate (n x r); may be empty
  double sigma = 0.0;     // assumed estimate error bound
  // misspecification knob: when > 0 the graph is sampled with this edge
  // probability while the attacker still assumes p
  double p_actual = 0.0;
};

// Gaussian LLR parameters: under H1 the statistic is N(+alpha_v/2, alpha_v),
// under H0 N(-alpha_v/2, alpha_v), with alpha_v = q_v Sigma^{-1} q_v^T and
// Sigma = p(1-p) Q^T Q.
struct LlrTheory {
  Eigen::RowVectorXd mu;      // p * 1^T Q
  Eigen::MatrixXd sigma;      // p(1-p) Q^T Q
  Eigen::MatrixXd sigma_inv_qt;  // Sigma^{-1} Q^T, cached for llr evaluation
  Eigen::VectorXd alpha;      // per node v

  static LlrTheory from_estimate(const Eigen::MatrixXd& q_est, double p);
};

struct CurvePoint {
  double gamma;
  double tpr;
  double fpr;
  double precision;
  double recall;
};

// standard normal CDF
double normal_cdf(double x);

// U rows from the favorable-to-attacker equality U = A_est * Q_est, or from
// protocol observables D Q_est + A_cross Q_other - Q_est H.
Eigen::MatrixXd attacker_observable(const Eigen::MatrixXd& a_block,
                                    const Eigen::MatrixXd& q_block);
Eigen::MatrixXd attacker_observable(const Eigen::VectorXd& target_degrees,
                                    const Eigen::MatrixXd& q_est,
                                    const Eigen::MatrixXd& a_cross,
                                    const Eigen::MatrixXd& q_other, const Eigen::MatrixXd& h);

// (U_{u,:} - mu + Q_{v,:}/2) Sigma^{-1} Q_{v,:}^T; decide H1 iff llr >= gamma.
double llr(const Eigen::MatrixXd& u, const LlrTheory& theory, const Eigen::MatrixXd& q_est,
           int node_u, int node_v);

// Closed-form TPR/FPR/precision/recall over a gamma grid spanning the two
// hypothesis means +- 5 sqrt(alpha); alpha = r / (n p (1-p)) unless the
// setting carries an explicit basis estimate (then the mean exact alpha_v).
std::vector<CurvePoint> theory_curves(const AttackSetting& setting, int grid_points = 201);

// KL divergence between the two LLR distributions: closed form
// r / (2 n p (1-p)); the exact same-variance Gaussian value alpha/2 is
// available from a concrete estimate for cross-checking.
double kl_gap(int r, int n, double p);
double kl_gap_exact(const Eigen::MatrixXd& q_est, double p, int node_v);

// Kolmogorov-Smirnov distance of standardized samples to N(0,1).
double ks_to_standard_normal(std::vector<double> samples);

// Monte-Carlo check of the LLR distribution claim: samples the Gaussianized
// model (U a Bernoulli-weighted row sum; the H0 observable shifts by -q_v)
// and reports moments and the KS distance of standardized samples to N(0,1).
struct TheoremCheck {
  double alpha = 0.0;    // exact alpha_v for the tested node
  double mean_h1 = 0.0;  // expect +alpha/2
  double mean_h0 = 0.0;  // expect -alpha/2
  double var_h1 = 0.0;   // expect alpha
  double ks = 1.0;
  int samples = 0;
};
TheoremCheck validate_llr_theory(const Eigen::MatrixXd& q_est, double p, int node_v,
                                 int samples, std::uint64_t seed);

struct AttackRun {
  std::vector<CurvePoint> theory;
  std::vector<CurvePoint> strong;     // attacker knows the exact basis rows
  std::vector<CurvePoint> realistic;  // least-norm estimate from aggregates
  double alpha_mean = 0.0;            // average exact alpha over target nodes
};

// Curve interpolation helpers for cross-curve comparisons.
double precision_at_recall(const std::vector<CurvePoint>& curve, double recall);
double tpr_at_fpr(const std::vector<CurvePoint>& curve, double fpr);

// Samples a Bernoulli graph on (n1 + n2) nodes, runs the decentralized
// factorization with two clients, and evaluates both attacker arms
// empirically: all positive pairs inside the target plus an equal-size
// negative sample, precision importance-reweighted by p.
AttackRun run_attack(const AttackSetting& setting, int n_attacker, int trials,
                     std::uint64_t seed);

// max over gamma of precision + recall per (p, n, r) combination
struct SweepRow {
  double p;
  int n;
  int r;
  double max_precision_plus_recall;
};
std::vector<SweepRow> r_sweep(const std::vector<std::pair<double, int>>& pairs,
                              const std::vector<int>& r_grid);

void write_curves_csv(const std::string& path, const std::vector<CurvePoint>& points, double p,
                      int n, int r, const std::string& source, bool append = false,
                      const std::string& header_comment = "");
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows,
                     const std::string& header_comment = "");

}  // namespace fedlap
