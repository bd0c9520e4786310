#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedlap/fednet.hpp"
#include "fedlap/partition.hpp"
#include "fedlap/spectral.hpp"

namespace fedlap {

// Training modes: spatial keeps per-node structure features S (n x d_s) and
// regularizes them through the graph edges; spectral keeps a compact W
// (r x d_s) against the fixed truncated eigenbasis.
enum class TrainMode { Spatial, Spectral };
TrainMode parse_mode(const std::string& name);  // "fedlap" | "fedlap-plus"
std::string mode_name(TrainMode mode);

enum class FeatureHeadForm { MlpOnly, MeanAggregate };

struct DenseLayer {
  Eigen::MatrixXd w;
  Eigen::VectorXd b;
};

struct ModelState {
  std::vector<DenseLayer> theta_f;
  std::vector<DenseLayer> theta_s;
  Eigen::MatrixXd struct_params;  // S in spatial mode, W in spectral mode
  TrainMode mode = TrainMode::Spectral;
};

struct TrainConfig {
  double learning_rate = 0.05;
  double weight_decay = 0.0;
  int epochs = 100;
  double lambda_reg = 1.0;
  int d_s = 16;
  int r = 16;
  TrainMode mode = TrainMode::Spectral;
  bool structure_head = true;  // off reduces training to plain FedSGD
  FeatureHeadForm feature_form = FeatureHeadForm::MeanAggregate;
  std::vector<int> f_hidden = {32};
  std::vector<int> s_hidden = {32};
  std::uint64_t seed = 1;
};

// Glorot-uniform MLP init; ReLU between layers, linear output.
std::vector<DenseLayer> make_mlp(const std::vector<int>& dims, std::uint64_t seed);
Eigen::VectorXd mlp_forward(const std::vector<DenseLayer>& layers, const Eigen::VectorXd& x);

// struct_rows: n in spatial mode, r in spectral mode.
ModelState init_model(const TrainConfig& cfg, int feature_dim, int num_classes, int struct_rows);

// f_{theta_f}(X_i, E_i, v): MlpOnly applies the MLP to x_v; MeanAggregate
// first averages x over {v} and its internal neighbors. Throws when v is not
// internal to the view.
Eigen::VectorXd feature_head(const PartitionedView& view, const std::vector<DenseLayer>& theta_f,
                             int global_v, FeatureHeadForm form);

// softmax(f(...) + g(struct input)) where the struct input is s_v (spatial)
// or U_{v,:} W (spectral, from the client's own basis rows).
Eigen::VectorXd predict(const PartitionedView& view, const ModelState& state,
                        const SpectralBasis* basis, const TrainConfig& cfg, int global_v);

// Train/val/test roles per node; 0 = unused.
struct LabelSplit {
  enum Role : std::int8_t { None = 0, Train = 1, Val = 2, Test = 3 };
  std::vector<std::int8_t> role;
  std::vector<int> members(Role r) const;
};
// Default policy: sample train/val per class over the whole labeled set.
LabelSplit stratified_split(const Graph& g, double train_frac, double val_frac,
                            std::uint64_t seed);
// Alternative policy: uniform sampling inside each client.
LabelSplit per_client_split(const Graph& g, const std::vector<PartitionedView>& views,
                            double train_frac, double val_frac, std::uint64_t seed);

// Rayleigh-quotient regularizer in both domains. Denominators are floored at
// 1e-12; an all-zero struct matrix is rejected upstream.
double spectral_regularizer(const Eigen::MatrixXd& w, const Eigen::VectorXd& lambda);
Eigen::MatrixXd spectral_regularizer_grad(const Eigen::MatrixXd& w,
                                          const Eigen::VectorXd& lambda);
// Edge-wise spatial form; each interconnection counted once by its
// lower-client-id owner, so the sum over clients equals Tr(S^T L S).
double spatial_regularizer(const std::vector<PartitionedView>& views, const Eigen::MatrixXd& s);
Eigen::MatrixXd spatial_regularizer_grad(const std::vector<PartitionedView>& views,
                                         const Eigen::MatrixXd& s);

// Global objective: CE over labeled train nodes / |train| + lambda_reg * R.
// basis is required in spectral mode and ignored in spatial mode.
double loss(const std::vector<PartitionedView>& views, const ModelState& state,
            const SpectralBasis* basis, const TrainConfig& cfg, const LabelSplit& split);

// Exact analytic gradient of loss() in every parameter; same shapes as the
// model. per_client, when given, receives each client's CE-part contribution
// (sum over its train nodes, unnormalized).
ModelState gradients(const std::vector<PartitionedView>& views, const ModelState& state,
                     const SpectralBasis* basis, const TrainConfig& cfg, const LabelSplit& split,
                     std::vector<ModelState>* per_client = nullptr);

struct EpochMetrics {
  int epoch;
  double train_loss;
  double reg_value;
  double train_acc;
  double val_acc;
  double test_acc;
};

struct TrainResult {
  ModelState state;
  std::vector<EpochMetrics> metrics;
  Transcript transcript;
};

// FedSGD rounds: clients compute local gradients, the server averages by
// labeled counts and applies one gradient-descent step with weight decay.
// In spectral mode W is renormalized to unit Frobenius norm each round and
// only model parameters travel; in spatial mode each epoch starts with the
// boundary NSF exchange. Throws NumericError when the loss turns non-finite.
TrainResult fedsgd_train(const std::vector<PartitionedView>& views, const SpectralBasis* basis,
                         const TrainConfig& cfg, const LabelSplit& split);

// Routes S rows of external neighbors through the server; returns, per
// client, {global node id -> row} for v in V_i*.
std::vector<std::map<int, Eigen::RowVectorXd>> boundary_nsf_exchange(
    const std::vector<PartitionedView>& views, const Eigen::MatrixXd& s,
    Transcript* transcript = nullptr, int round = 0);

// Empirical Lipschitz constant of the spectral regularizer gradient over
// random unit-Frobenius pairs; bounded by 8 * max(lambda).
double lipschitz_probe(const Eigen::VectorXd& lambda, int d_s, int trials, std::uint64_t seed);

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& metrics,
                       const std::string& header_comment = "");

// Binary checkpoint with JSON manifest {mode, shapes, seed, config_hash}.
void write_checkpoint(const std::string& path, const ModelState& state,
                      const std::string& config_hash, std::uint64_t seed);
ModelState read_checkpoint(const std::string& path);

}  // namespace fedlap
