#include "fedlap/learner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "fedlap/errors.hpp"
#include "fedlap/rng.hpp"
#include "fedlap/sha256.hpp"

namespace fedlap {

TrainMode parse_mode(const std::string& name) {
  if (name == "fedlap") return TrainMode::Spatial;
  if (name == "fedlap-plus") return TrainMode::Spectral;
  throw ConfigError("unknown mode: " + name);
}

std::string mode_name(TrainMode mode) {
  return mode == TrainMode::Spatial ? "fedlap" : "fedlap-plus";
}

// ---------------------------------------------------------------------- MLP

std::vector<DenseLayer> make_mlp(const std::vector<int>& dims, std::uint64_t seed) {
  if (dims.size() < 2) throw std::invalid_argument("make_mlp: need at least in/out dims");
  std::vector<DenseLayer> layers;
  Rng rng(seed);
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer;
    const int fan_in = dims[l], fan_out = dims[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    layer.w.resize(fan_out, fan_in);
    for (int i = 0; i < fan_out; ++i)
      for (int j = 0; j < fan_in; ++j) layer.w(i, j) = bound * (2.0 * rng.uniform01() - 1.0);
    layer.b = Eigen::VectorXd::Zero(fan_out);
    layers.push_back(std::move(layer));
  }
  return layers;
}

namespace {

struct MlpCache {
  std::vector<Eigen::VectorXd> inputs;  // a_l per layer
  std::vector<Eigen::VectorXd> pre;     // z_l per layer
};

Eigen::VectorXd mlp_forward_cached(const std::vector<DenseLayer>& layers,
                                   const Eigen::VectorXd& x, MlpCache* cache) {
  Eigen::VectorXd a = x;
  for (size_t l = 0; l < layers.size(); ++l) {
    if (cache) cache->inputs.push_back(a);
    Eigen::VectorXd z = layers[l].w * a + layers[l].b;
    if (cache) cache->pre.push_back(z);
    if (l + 1 < layers.size())
      a = z.cwiseMax(0.0);
    else
      a = std::move(z);
  }
  return a;
}

// Accumulates parameter gradients; returns the gradient w.r.t. the input.
Eigen::VectorXd mlp_backward(const std::vector<DenseLayer>& layers, const MlpCache& cache,
                             Eigen::VectorXd dout, std::vector<DenseLayer>& grads) {
  for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
    const auto ul = static_cast<size_t>(l);
    grads[ul].w.noalias() += dout * cache.inputs[ul].transpose();
    grads[ul].b += dout;
    Eigen::VectorXd dinput = layers[ul].w.transpose() * dout;
    if (l > 0) {
      const Eigen::VectorXd& z = cache.pre[ul - 1];
      for (Eigen::Index i = 0; i < dinput.size(); ++i)
        if (z[i] <= 0.0) dinput[i] = 0.0;
    }
    dout = std::move(dinput);
  }
  return dout;
}

std::vector<DenseLayer> zeros_like(const std::vector<DenseLayer>& layers) {
  std::vector<DenseLayer> out;
  out.reserve(layers.size());
  for (const auto& layer : layers)
    out.push_back({Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols()),
                   Eigen::VectorXd::Zero(layer.b.size())});
  return out;
}

void axpy_layers(std::vector<DenseLayer>& acc, const std::vector<DenseLayer>& other,
                 double scale) {
  for (size_t l = 0; l < acc.size(); ++l) {
    acc[l].w += scale * other[l].w;
    acc[l].b += scale * other[l].b;
  }
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd shifted = logits.array() - logits.maxCoeff();
  Eigen::VectorXd expd = shifted.array().exp();
  return expd / expd.sum();
}

}  // namespace

Eigen::VectorXd mlp_forward(const std::vector<DenseLayer>& layers, const Eigen::VectorXd& x) {
  return mlp_forward_cached(layers, x, nullptr);
}

ModelState init_model(const TrainConfig& cfg, int feature_dim, int num_classes,
                      int struct_rows) {
  ModelState state;
  state.mode = cfg.mode;
  std::vector<int> f_dims{feature_dim};
  f_dims.insert(f_dims.end(), cfg.f_hidden.begin(), cfg.f_hidden.end());
  f_dims.push_back(num_classes);
  state.theta_f = make_mlp(f_dims, derive_seed(cfg.seed, "theta-f"));

  std::vector<int> s_dims{cfg.d_s};
  s_dims.insert(s_dims.end(), cfg.s_hidden.begin(), cfg.s_hidden.end());
  s_dims.push_back(num_classes);
  state.theta_s = make_mlp(s_dims, derive_seed(cfg.seed, "theta-s"));

  Rng rng(derive_seed(cfg.seed, "struct-params"));
  state.struct_params.resize(struct_rows, cfg.d_s);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_s));
  for (int i = 0; i < struct_rows; ++i)
    for (int j = 0; j < cfg.d_s; ++j) state.struct_params(i, j) = scale * rng.normal();
  if (cfg.mode == TrainMode::Spectral)
    state.struct_params /= std::max(state.struct_params.norm(), 1e-12);
  return state;
}

// -------------------------------------------------------------------- heads

namespace {

Eigen::VectorXd aggregate_input(const PartitionedView& view, int local_v, FeatureHeadForm form) {
  if (form == FeatureHeadForm::MlpOnly) return view.features.row(local_v).transpose();
  // mean over the node and its internal neighbors; isolated nodes reduce to
  // the plain MLP form
  Eigen::VectorXd acc = view.features.row(local_v).transpose();
  int count = 1;
  const auto& owner = *view.node_owner;
  for (int w : view.neighbors[local_v]) {
    if (owner[static_cast<size_t>(w)] != view.client_id) continue;
    acc += view.features.row(view.local(w)).transpose();
    ++count;
  }
  return acc / static_cast<double>(count);
}

}  // namespace

Eigen::VectorXd feature_head(const PartitionedView& view, const std::vector<DenseLayer>& theta_f,
                             int global_v, FeatureHeadForm form) {
  auto it = view.global_to_local.find(global_v);
  if (it == view.global_to_local.end())
    throw std::invalid_argument("feature_head: node " + std::to_string(global_v) +
                                " is external to client " + std::to_string(view.client_id));
  return mlp_forward(theta_f, aggregate_input(view, it->second, form));
}

Eigen::VectorXd predict(const PartitionedView& view, const ModelState& state,
                        const SpectralBasis* basis, const TrainConfig& cfg, int global_v) {
  Eigen::VectorXd logits = feature_head(view, state.theta_f, global_v, cfg.feature_form);
  if (cfg.structure_head) {
    Eigen::VectorXd struct_in;
    if (state.mode == TrainMode::Spatial) {
      if (global_v >= state.struct_params.rows())
        throw std::invalid_argument("predict: missing s_v row for node " +
                                    std::to_string(global_v));
      struct_in = state.struct_params.row(global_v).transpose();
    } else {
      if (!basis || global_v >= basis->u.rows())
        throw std::invalid_argument("predict: missing U row for node " +
                                    std::to_string(global_v));
      if (basis->u.cols() != state.struct_params.rows())
        throw std::invalid_argument("predict: basis rank does not match W rows");
      struct_in = (basis->u.row(global_v) * state.struct_params).transpose();
    }
    logits += mlp_forward(state.theta_s, struct_in);
  }
  return softmax(logits);
}

// -------------------------------------------------------------------- split

std::vector<int> LabelSplit::members(Role r) const {
  std::vector<int> out;
  for (size_t v = 0; v < role.size(); ++v)
    if (role[v] == r) out.push_back(static_cast<int>(v));
  return out;
}

namespace {

LabelSplit split_pool(const std::vector<std::vector<int>>& pools, size_t n, double train_frac,
                      double val_frac, Rng& rng) {
  LabelSplit split;
  split.role.assign(n, LabelSplit::None);
  for (const auto& pool_const : pools) {
    if (pool_const.empty()) continue;
    std::vector<int> pool = pool_const;
    for (size_t i = pool.size(); i > 1; --i)
      std::swap(pool[i - 1], pool[rng.uniform_below(i)]);
    const auto sz = static_cast<double>(pool.size());
    const size_t n_train = std::max<size_t>(1, static_cast<size_t>(std::lround(sz * train_frac)));
    const size_t n_val = static_cast<size_t>(std::lround(sz * val_frac));
    for (size_t i = 0; i < pool.size(); ++i) {
      if (i < n_train)
        split.role[static_cast<size_t>(pool[i])] = LabelSplit::Train;
      else if (i < n_train + n_val)
        split.role[static_cast<size_t>(pool[i])] = LabelSplit::Val;
      else
        split.role[static_cast<size_t>(pool[i])] = LabelSplit::Test;
    }
  }
  return split;
}

}  // namespace

LabelSplit stratified_split(const Graph& g, double train_frac, double val_frac,
                            std::uint64_t seed) {
  std::vector<std::vector<int>> pools(static_cast<size_t>(std::max(1, g.num_classes())));
  for (int v : g.labeled_set()) pools[static_cast<size_t>(g.label(v))].push_back(v);
  Rng rng(derive_seed(seed, "stratified-split"));
  return split_pool(pools, static_cast<size_t>(g.node_count()), train_frac, val_frac, rng);
}

LabelSplit per_client_split(const Graph& g, const std::vector<PartitionedView>& views,
                            double train_frac, double val_frac, std::uint64_t seed) {
  std::vector<std::vector<int>> pools;
  for (const auto& view : views) pools.push_back(view.labeled);
  Rng rng(derive_seed(seed, "per-client-split"));
  return split_pool(pools, static_cast<size_t>(g.node_count()), train_frac, val_frac, rng);
}

// ------------------------------------------------------------- regularizers

double spectral_regularizer(const Eigen::MatrixXd& w, const Eigen::VectorXd& lambda) {
  if (w.rows() != lambda.size())
    throw std::invalid_argument("spectral_regularizer: W rows != eigenvalue count");
  double num = 0.0;
  for (Eigen::Index j = 0; j < w.rows(); ++j) num += lambda[j] * w.row(j).squaredNorm();
  return num / std::max(w.squaredNorm(), 1e-12);
}

Eigen::MatrixXd spectral_regularizer_grad(const Eigen::MatrixXd& w,
                                          const Eigen::VectorXd& lambda) {
  const double den = std::max(w.squaredNorm(), 1e-12);
  const double r = spectral_regularizer(w, lambda);
  Eigen::MatrixXd grad = lambda.asDiagonal() * w;
  grad -= r * w;
  return (2.0 / den) * grad;
}

namespace {

// enumerate every global edge exactly once: internal edges per owner plus
// interconnections attributed to the lower-client-id endpoint owner
template <class Fn>
void for_each_owned_edge(const std::vector<PartitionedView>& views, Fn fn) {
  for (const auto& view : views) {
    for (auto [u, v] : view.internal_edges) fn(u, v);
    const auto& owner = *view.node_owner;
    for (auto [in, out] : view.interconnections)
      if (view.client_id < owner[static_cast<size_t>(out)]) fn(in, out);
  }
}

}  // namespace

double spatial_regularizer(const std::vector<PartitionedView>& views, const Eigen::MatrixXd& s) {
  double num = 0.0;
  for_each_owned_edge(views, [&](int u, int v) { num += (s.row(u) - s.row(v)).squaredNorm(); });
  return num / std::max(s.squaredNorm(), 1e-12);
}

Eigen::MatrixXd spatial_regularizer_grad(const std::vector<PartitionedView>& views,
                                         const Eigen::MatrixXd& s) {
  const double den = std::max(s.squaredNorm(), 1e-12);
  const double r = spatial_regularizer(views, s);
  Eigen::MatrixXd ls = Eigen::MatrixXd::Zero(s.rows(), s.cols());
  for_each_owned_edge(views, [&](int u, int v) {
    const Eigen::RowVectorXd diff = s.row(u) - s.row(v);
    ls.row(u) += diff;
    ls.row(v) -= diff;
  });
  ls -= r * s;
  return (2.0 / den) * ls;
}

// ----------------------------------------------------------------- evaluate

namespace {

ModelState zero_grads(const ModelState& state) {
  ModelState g;
  g.mode = state.mode;
  g.theta_f = zeros_like(state.theta_f);
  g.theta_s = zeros_like(state.theta_s);
  g.struct_params =
      Eigen::MatrixXd::Zero(state.struct_params.rows(), state.struct_params.cols());
  return g;
}

struct Evaluation {
  double ce_sum = 0.0;
  int train_count = 0;
  int correct[4] = {0, 0, 0, 0};
  int total[4] = {0, 0, 0, 0};
};

// forward (and optionally backward) over one client's labeled nodes
Evaluation evaluate_client(const PartitionedView& view, const ModelState& state,
                           const SpectralBasis* basis, const TrainConfig& cfg,
                           const LabelSplit& split, ModelState* grads) {
  Evaluation ev;
  const int d_c = static_cast<int>(state.theta_f.back().b.size());
  for (int lv = 0; lv < view.size(); ++lv) {
    const int v = view.internal_nodes[static_cast<size_t>(lv)];
    const int y = view.labels[static_cast<size_t>(lv)];
    const auto role = split.role[static_cast<size_t>(v)];
    if (y < 0 || role == LabelSplit::None) continue;
    if (y >= d_c) throw std::invalid_argument("evaluate: label exceeds output dimension");

    MlpCache f_cache, s_cache;
    const bool want_grad = grads && role == LabelSplit::Train;
    Eigen::VectorXd f_in = aggregate_input(view, lv, cfg.feature_form);
    Eigen::VectorXd logits =
        mlp_forward_cached(state.theta_f, f_in, want_grad ? &f_cache : nullptr);
    Eigen::VectorXd struct_in;
    if (cfg.structure_head) {
      if (state.mode == TrainMode::Spatial)
        struct_in = state.struct_params.row(v).transpose();
      else
        struct_in = (basis->u.row(v) * state.struct_params).transpose();
      logits += mlp_forward_cached(state.theta_s, struct_in, want_grad ? &s_cache : nullptr);
    }
    Eigen::VectorXd probs = softmax(logits);

    Eigen::Index pred;
    probs.maxCoeff(&pred);
    ++ev.total[role];
    if (static_cast<int>(pred) == y) ++ev.correct[role];

    if (role == LabelSplit::Train) {
      ev.ce_sum += -std::log(std::max(probs[y], 1e-300));
      ++ev.train_count;
      if (want_grad) {
        Eigen::VectorXd dlogits = probs;
        dlogits[y] -= 1.0;
        mlp_backward(state.theta_f, f_cache, dlogits, grads->theta_f);
        if (cfg.structure_head) {
          Eigen::VectorXd dstruct_in =
              mlp_backward(state.theta_s, s_cache, dlogits, grads->theta_s);
          if (state.mode == TrainMode::Spatial)
            grads->struct_params.row(v) += dstruct_in.transpose();
          else
            grads->struct_params.noalias() +=
                basis->u.row(v).transpose() * dstruct_in.transpose();
        }
      }
    }
  }
  return ev;
}

struct GlobalEval {
  double loss = 0.0;
  double reg = 0.0;
  double acc[4] = {0, 0, 0, 0};
  int train_count = 0;
  ModelState grads;
};

GlobalEval evaluate(const std::vector<PartitionedView>& views, const ModelState& state,
                    const SpectralBasis* basis, const TrainConfig& cfg, const LabelSplit& split,
                    bool with_grads, std::vector<ModelState>* per_client) {
  const int k = static_cast<int>(views.size());
  int n = 0;
  for (const auto& view : views) n += view.size();
  if (cfg.structure_head && state.mode == TrainMode::Spectral) {
    if (!basis) throw std::invalid_argument("evaluate: spectral mode requires a basis");
    if (basis->u.rows() != n) throw std::invalid_argument("evaluate: missing U rows");
    if (basis->u.cols() != state.struct_params.rows())
      throw std::invalid_argument("evaluate: basis rank does not match W rows");
  }
  if (cfg.structure_head && cfg.lambda_reg != 0.0 && state.struct_params.squaredNorm() == 0.0)
    throw std::invalid_argument("evaluate: all-zero struct params, regularizer undefined");

  std::vector<Evaluation> evs(static_cast<size_t>(k));
  std::vector<ModelState> client_grads;
  if (with_grads)
    for (int i = 0; i < k; ++i) client_grads.push_back(zero_grads(state));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < k; ++i)
    evs[static_cast<size_t>(i)] =
        evaluate_client(views[static_cast<size_t>(i)], state, basis, cfg, split,
                        with_grads ? &client_grads[static_cast<size_t>(i)] : nullptr);

  GlobalEval out;
  if (with_grads) out.grads = zero_grads(state);
  double ce_sum = 0.0;
  int correct[4] = {0, 0, 0, 0}, total[4] = {0, 0, 0, 0};
  for (int i = 0; i < k; ++i) {
    const auto& ev = evs[static_cast<size_t>(i)];
    ce_sum += ev.ce_sum;
    out.train_count += ev.train_count;
    for (int rle = 1; rle < 4; ++rle) {
      correct[rle] += ev.correct[rle];
      total[rle] += ev.total[rle];
    }
  }
  if (out.train_count == 0)
    throw std::invalid_argument("evaluate: no labeled training node in any view");
  for (int rle = 1; rle < 4; ++rle)
    out.acc[rle] = total[rle] > 0 ? static_cast<double>(correct[rle]) / total[rle] : 0.0;

  if (cfg.structure_head && cfg.lambda_reg != 0.0)
    out.reg = state.mode == TrainMode::Spatial
                  ? spatial_regularizer(views, state.struct_params)
                  : spectral_regularizer(state.struct_params, basis->lambda);
  out.loss = ce_sum / out.train_count + cfg.lambda_reg * out.reg;

  if (with_grads) {
    const double inv = 1.0 / out.train_count;
    for (int i = 0; i < k; ++i) {
      axpy_layers(out.grads.theta_f, client_grads[static_cast<size_t>(i)].theta_f, inv);
      axpy_layers(out.grads.theta_s, client_grads[static_cast<size_t>(i)].theta_s, inv);
      out.grads.struct_params += inv * client_grads[static_cast<size_t>(i)].struct_params;
    }
    if (cfg.structure_head && cfg.lambda_reg != 0.0) {
      if (state.mode == TrainMode::Spatial)
        out.grads.struct_params +=
            cfg.lambda_reg * spatial_regularizer_grad(views, state.struct_params);
      else
        out.grads.struct_params +=
            cfg.lambda_reg * spectral_regularizer_grad(state.struct_params, basis->lambda);
    }
    if (per_client) *per_client = std::move(client_grads);
  }
  return out;
}

std::vector<double> flatten(const ModelState& state) {
  std::vector<double> out;
  auto push_layers = [&](const std::vector<DenseLayer>& layers) {
    for (const auto& layer : layers) {
      out.insert(out.end(), layer.w.data(), layer.w.data() + layer.w.size());
      out.insert(out.end(), layer.b.data(), layer.b.data() + layer.b.size());
    }
  };
  push_layers(state.theta_f);
  push_layers(state.theta_s);
  out.insert(out.end(), state.struct_params.data(),
             state.struct_params.data() + state.struct_params.size());
  return out;
}

}  // namespace

double loss(const std::vector<PartitionedView>& views, const ModelState& state,
            const SpectralBasis* basis, const TrainConfig& cfg, const LabelSplit& split) {
  return evaluate(views, state, basis, cfg, split, false, nullptr).loss;
}

ModelState gradients(const std::vector<PartitionedView>& views, const ModelState& state,
                     const SpectralBasis* basis, const TrainConfig& cfg, const LabelSplit& split,
                     std::vector<ModelState>* per_client) {
  return evaluate(views, state, basis, cfg, split, true, per_client).grads;
}

// ----------------------------------------------------------------- exchange

std::vector<std::map<int, Eigen::RowVectorXd>> boundary_nsf_exchange(
    const std::vector<PartitionedView>& views, const Eigen::MatrixXd& s, Transcript* transcript,
    int round) {
  const int k = static_cast<int>(views.size());
  const int d_s = static_cast<int>(s.cols());
  // rows each owner must upload: its internal nodes demanded by someone else
  std::vector<std::vector<int>> uploads(static_cast<size_t>(k));
  for (const auto& view : views) {
    const auto& owner = *view.node_owner;
    for (int v : view.external_neighbors)
      uploads[static_cast<size_t>(owner[static_cast<size_t>(v)])].push_back(v);
  }
  for (auto& rows : uploads) {
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  }
  std::vector<std::map<int, Eigen::RowVectorXd>> received(static_cast<size_t>(k));
  for (int j = 0; j < k; ++j)
    if (transcript && !uploads[static_cast<size_t>(j)].empty())
      transcript->record(round, j, -1, "nsf-upload",
                         static_cast<int>(uploads[static_cast<size_t>(j)].size()) * d_s, "");
  for (int i = 0; i < k; ++i) {
    for (int v : views[static_cast<size_t>(i)].external_neighbors)
      received[static_cast<size_t>(i)].emplace(v, s.row(v));
    if (transcript && !views[static_cast<size_t>(i)].external_neighbors.empty())
      transcript->record(
          round, -1, i, "nsf-download",
          static_cast<int>(views[static_cast<size_t>(i)].external_neighbors.size()) * d_s, "");
  }
  return received;
}

// -------------------------------------------------------------------- train

TrainResult fedsgd_train(const std::vector<PartitionedView>& views, const SpectralBasis* basis,
                         const TrainConfig& cfg, const LabelSplit& split) {
  int n = 0, num_classes = 0, d = 0;
  for (const auto& view : views) {
    n += view.size();
    d = static_cast<int>(view.features.cols());
    for (int y : view.labels) num_classes = std::max(num_classes, y + 1);
  }
  if (num_classes < 2) throw ConfigError("fedsgd_train: need at least two classes");
  const int struct_rows = cfg.mode == TrainMode::Spatial ? n : cfg.r;
  if (cfg.mode == TrainMode::Spectral && cfg.structure_head) {
    if (!basis) throw MissingArtifactError("fedsgd_train: spectral mode requires offline basis");
    if (basis->rank() != cfg.r)
      throw ConfigError("fedsgd_train: basis rank " + std::to_string(basis->rank()) +
                        " != configured r " + std::to_string(cfg.r));
  }

  TrainResult result;
  result.state = init_model(cfg, d, num_classes, struct_rows);
  const int k = static_cast<int>(views.size());
  const int theta_scalars = static_cast<int>(flatten(result.state).size());

  const double lr = cfg.learning_rate;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.mode == TrainMode::Spatial && cfg.structure_head)
      boundary_nsf_exchange(views, result.state.struct_params, &result.transcript, epoch);

    std::vector<ModelState> per_client;
    GlobalEval ev = evaluate(views, result.state, basis, cfg, split, true, &per_client);
    if (!std::isfinite(ev.loss))
      throw NumericError("fedsgd_train: non-finite loss at epoch " + std::to_string(epoch));
    result.metrics.push_back({epoch, ev.loss, ev.reg, ev.acc[LabelSplit::Train],
                              ev.acc[LabelSplit::Val], ev.acc[LabelSplit::Test]});

    for (int i = 0; i < k; ++i)
      result.transcript.record(epoch, views[static_cast<size_t>(i)].client_id, -1, "grad-upload",
                               theta_scalars,
                               sha256_hex(flatten(per_client[static_cast<size_t>(i)])));

    auto step_layers = [&](std::vector<DenseLayer>& layers,
                           const std::vector<DenseLayer>& grads) {
      for (size_t l = 0; l < layers.size(); ++l) {
        layers[l].w -= lr * (grads[l].w + cfg.weight_decay * layers[l].w);
        layers[l].b -= lr * (grads[l].b + cfg.weight_decay * layers[l].b);
      }
    };
    step_layers(result.state.theta_f, ev.grads.theta_f);
    if (cfg.structure_head) {
      step_layers(result.state.theta_s, ev.grads.theta_s);
      result.state.struct_params -= lr * ev.grads.struct_params;
      if (cfg.mode == TrainMode::Spectral)
        result.state.struct_params /= std::max(result.state.struct_params.norm(), 1e-12);
    }

    const std::string model_sha = sha256_hex(flatten(result.state));
    for (int i = 0; i < k; ++i)
      result.transcript.record(epoch, -1, views[static_cast<size_t>(i)].client_id,
                               "model-download", theta_scalars, model_sha);
  }
  return result;
}

// ------------------------------------------------------------------- probes

double lipschitz_probe(const Eigen::VectorXd& lambda, int d_s, int trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("lipschitz_probe: need trials >= 1");
  const int r = static_cast<int>(lambda.size());
  Rng rng(derive_seed(seed, "lipschitz-probe"));
  // gradient of the quotient restricted to the unit Frobenius sphere
  auto sphere_grad = [&](const Eigen::MatrixXd& w) -> Eigen::MatrixXd {
    const double quad = (lambda.asDiagonal() * w).cwiseProduct(w).sum();
    return 2.0 * (lambda.asDiagonal() * w - quad * w);
  };
  auto random_unit = [&]() {
    Eigen::MatrixXd w(r, d_s);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < d_s; ++j) w(i, j) = rng.normal();
    return Eigen::MatrixXd(w / std::max(w.norm(), 1e-300));
  };
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    Eigen::MatrixXd w1 = random_unit(), w2 = random_unit();
    const double dist = (w1 - w2).norm();
    if (dist < 1e-12) continue;
    worst = std::max(worst, (sphere_grad(w1) - sphere_grad(w2)).norm() / dist);
  }
  return worst;
}

// ----------------------------------------------------------------------- io

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& metrics,
                       const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) throw MissingArtifactError("cannot write " + path);
  out.precision(10);
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  out << "epoch,train_loss,reg_value,train_acc,val_acc,test_acc\n";
  for (const auto& m : metrics)
    out << m.epoch << "," << m.train_loss << "," << m.reg_value << "," << m.train_acc << ","
        << m.val_acc << "," << m.test_acc << "\n";
}

void write_checkpoint(const std::string& path, const ModelState& state,
                      const std::string& config_hash, std::uint64_t seed) {
  std::vector<double> flat = flatten(state);
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MissingArtifactError("cannot write " + path);
    out.write(reinterpret_cast<const char*>(flat.data()),
              static_cast<std::streamsize>(flat.size() * sizeof(double)));
  }
  nlohmann::json shapes;
  auto layer_shapes = [](const std::vector<DenseLayer>& layers) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& layer : layers) arr.push_back({layer.w.rows(), layer.w.cols()});
    return arr;
  };
  shapes["theta_f"] = layer_shapes(state.theta_f);
  shapes["theta_s"] = layer_shapes(state.theta_s);
  shapes["struct"] = {state.struct_params.rows(), state.struct_params.cols()};
  nlohmann::json manifest{{"mode", mode_name(state.mode)},
                          {"shapes", shapes},
                          {"seed", seed},
                          {"config_hash", config_hash},
                          {"sha256", sha256_hex(flat)}};
  std::ofstream side(path + ".json");
  side << manifest.dump(2) << "\n";
}

ModelState read_checkpoint(const std::string& path) {
  std::ifstream side(path + ".json");
  if (!side) throw MissingArtifactError("missing checkpoint manifest " + path + ".json");
  nlohmann::json manifest = nlohmann::json::parse(side);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("missing checkpoint " + path);
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<size_t>(in.tellg());
  in.seekg(0);
  std::vector<double> flat(bytes / sizeof(double));
  in.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(bytes));

  ModelState state;
  state.mode = parse_mode(manifest.at("mode").get<std::string>());
  size_t cursor = 0;
  auto take_layers = [&](const nlohmann::json& shapes) {
    std::vector<DenseLayer> layers;
    for (const auto& sh : shapes) {
      DenseLayer layer;
      const auto rows = sh[0].get<Eigen::Index>(), cols = sh[1].get<Eigen::Index>();
      layer.w.resize(rows, cols);
      std::copy_n(flat.begin() + static_cast<long>(cursor), rows * cols, layer.w.data());
      cursor += static_cast<size_t>(rows * cols);
      layer.b.resize(rows);
      std::copy_n(flat.begin() + static_cast<long>(cursor), rows, layer.b.data());
      cursor += static_cast<size_t>(rows);
      layers.push_back(std::move(layer));
    }
    return layers;
  };
  state.theta_f = take_layers(manifest.at("shapes").at("theta_f"));
  state.theta_s = take_layers(manifest.at("shapes").at("theta_s"));
  const auto srows = manifest.at("shapes").at("struct")[0].get<Eigen::Index>();
  const auto scols = manifest.at("shapes").at("struct")[1].get<Eigen::Index>();
  state.struct_params.resize(srows, scols);
  std::copy_n(flat.begin() + static_cast<long>(cursor), srows * scols,
              state.struct_params.data());
  return state;
}

}  // namespace fedlap
