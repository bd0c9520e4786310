// Command-line front end: dataset ingestion, partitioning, the offline
// spectral phase, federated training, the privacy lab, and output
// verification. All outputs embed the config hash and master seed; `verify`
// re-hashes them. Exit codes: 0 ok, 2 config error, 3 numeric divergence,
// 4 missing artifact.

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "fedlap/basis_io.hpp"
#include "fedlap/errors.hpp"
#include "fedlap/fednet.hpp"
#include "fedlap/graph.hpp"
#include "fedlap/graph_io.hpp"
#include "fedlap/learner.hpp"
#include "fedlap/partition.hpp"
#include "fedlap/privacy.hpp"
#include "fedlap/rng.hpp"
#include "fedlap/sha256.hpp"
#include "fedlap/spectral.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fedlap;

namespace {

json default_config() {
  return json{
      {"dataset", {{"type", "sbm"},
                   {"block_sizes", {100, 100, 100, 100}},
                   {"p_in", 0.08},
                   {"p_out", 0.005}}},
      {"partition", {{"scheme", "random"}, {"k", 5}}},
      {"mode", "fedlap-plus"},
      {"r", 16},
      {"backend", "mock"},
      {"train", {{"learning_rate", 0.05},
                 {"weight_decay", 0.0},
                 {"epochs", 100},
                 {"lambda_reg", 1.0},
                 {"d_s", 16},
                 {"structure_head", true},
                 {"feature_form", "mean-aggregate"},
                 {"f_hidden", {32}},
                 {"s_hidden", {32}},
                 {"train_fraction", 0.1},
                 {"val_fraction", 0.1},
                 {"label_split", "global-stratified"}}},
      {"attack", {{"pairs", {{0.0139, 2277}, {0.008, 7650}, {0.0005, 19717}}},
                  {"r_grid", {40, 80, 120, 160, 175, 200, 350, 400, 700}},
                  {"theory_only", false},
                  {"empirical", {{"n_target", 3000},
                                 {"n_attacker", 1000},
                                 {"p", 0.0005},
                                 {"r", 12},
                                 {"trials", 10000}}},
                  {"validation", {{"n", 2000}, {"p", 0.01}, {"r", 50}, {"samples", 20000}}}}},
      {"out_dir", "out"},
      {"master_seed", 1}};
}

void merge_over(json& base, const json& overlay) {
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    if (it->is_object() && base.contains(it.key()) && base[it.key()].is_object())
      merge_over(base[it.key()], *it);
    else
      base[it.key()] = *it;
  }
}

struct Run {
  json cfg;
  std::string config_hash;
  std::uint64_t seed = 1;
  fs::path out;

  fs::path path(const std::string& name) const { return out / name; }
  std::string stamp() const {
    return "config_hash=" + config_hash + " master_seed=" + std::to_string(seed);
  }
};

Run make_run(json cfg) {
  Run run;
  if (const char* env = std::getenv("FEDLAP_OUT")) cfg["out_dir"] = env;
  run.cfg = cfg;
  run.config_hash = sha256_hex(cfg.dump());
  run.seed = cfg.at("master_seed").get<std::uint64_t>();
  run.out = fs::path(cfg.at("out_dir").get<std::string>());
  fs::create_directories(run.out);
  return run;
}

void manifest_add(const Run& run, const std::vector<std::string>& files) {
  json manifest{{"config_hash", run.config_hash}, {"master_seed", run.seed},
                {"files", json::object()}};
  const fs::path mpath = run.path("manifest.json");
  if (fs::exists(mpath)) {
    std::ifstream in(mpath);
    json existing = json::parse(in, nullptr, false);
    if (!existing.is_discarded() &&
        existing.value("config_hash", "") == run.config_hash)
      manifest = existing;
  }
  for (const auto& f : files) manifest["files"][f] = sha256_file(run.path(f).string());
  std::ofstream out(mpath);
  out << manifest.dump(2) << "\n";
}

std::shared_ptr<const Graph> load_dataset(const Run& run) {
  const json& ds = run.cfg.at("dataset");
  const std::string type = ds.at("type").get<std::string>();
  const std::uint64_t seed = derive_seed(run.seed, "dataset");
  if (type == "sbm") {
    return std::make_shared<Graph>(sbm_generate(ds.at("block_sizes").get<std::vector<int>>(),
                                                ds.at("p_in").get<double>(),
                                                ds.at("p_out").get<double>(), seed));
  }
  if (type == "bernoulli") {
    return std::make_shared<Graph>(
        bernoulli_graph(ds.at("n").get<int>(), ds.at("p").get<double>(), seed));
  }
  if (type == "files") {
    const fs::path dir = ds.at("dir").get<std::string>();
    auto ingested = read_edge_list((dir / "edges.tsv").string());
    Eigen::MatrixXd feats =
        read_features_csv((dir / "features.csv").string(), ingested.node_count);
    std::vector<int> labels;
    if (fs::exists(dir / "labels.csv"))
      labels = read_dense_labels_csv((dir / "labels.csv").string(), ingested.node_count);
    return std::make_shared<Graph>(build_graph(ingested.edges, std::move(feats), labels));
  }
  throw ConfigError("unknown dataset type: " + type);
}

std::vector<PartitionedView> load_views(const Run& run, std::shared_ptr<const Graph> g) {
  const json& part = run.cfg.at("partition");
  return partition(std::move(g), parse_partition_scheme(part.at("scheme").get<std::string>()),
                   part.at("k").get<int>(), derive_seed(run.seed, "partition"));
}

TrainConfig train_config(const Run& run) {
  const json& tc = run.cfg.at("train");
  TrainConfig cfg;
  cfg.learning_rate = tc.at("learning_rate").get<double>();
  cfg.weight_decay = tc.at("weight_decay").get<double>();
  cfg.epochs = tc.at("epochs").get<int>();
  cfg.lambda_reg = tc.at("lambda_reg").get<double>();
  cfg.d_s = tc.at("d_s").get<int>();
  cfg.r = run.cfg.at("r").get<int>();
  cfg.mode = parse_mode(run.cfg.at("mode").get<std::string>());
  cfg.structure_head = tc.at("structure_head").get<bool>();
  const std::string form = tc.at("feature_form").get<std::string>();
  if (form == "mlp")
    cfg.feature_form = FeatureHeadForm::MlpOnly;
  else if (form == "mean-aggregate")
    cfg.feature_form = FeatureHeadForm::MeanAggregate;
  else
    throw ConfigError("unknown feature_form: " + form);
  cfg.f_hidden = tc.at("f_hidden").get<std::vector<int>>();
  cfg.s_hidden = tc.at("s_hidden").get<std::vector<int>>();
  cfg.seed = derive_seed(run.seed, "train");
  if (cfg.learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (cfg.lambda_reg < 0.0) throw ConfigError("lambda_reg must be nonnegative");
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  return cfg;
}

LabelSplit make_split(const Run& run, const Graph& g,
                      const std::vector<PartitionedView>& views) {
  const json& tc = run.cfg.at("train");
  const double train_frac = tc.at("train_fraction").get<double>();
  const double val_frac = tc.at("val_fraction").get<double>();
  const std::string policy = tc.at("label_split").get<std::string>();
  const std::uint64_t seed = derive_seed(run.seed, "label-split");
  if (policy == "global-stratified") return stratified_split(g, train_frac, val_frac, seed);
  if (policy == "per-client-uniform")
    return per_client_split(g, views, train_frac, val_frac, seed);
  throw ConfigError("unknown label_split: " + policy);
}

// ------------------------------------------------------------- subcommands

int cmd_ingest(const Run& run, const std::string& edges, const std::string& features,
               const std::string& labels) {
  auto ingested = read_edge_list(edges);
  Eigen::MatrixXd feats = read_features_csv(features, ingested.node_count);
  std::vector<int> label_vec;
  if (!labels.empty()) {
    std::map<std::string, int> id_of(ingested.id_map.begin(), ingested.id_map.end());
    label_vec = read_labels_csv(labels, id_of, ingested.node_count);
  }
  Graph g = build_graph(ingested.edges, std::move(feats), label_vec);
  if (g.self_loops_dropped() > 0)
    std::cerr << "warning: dropped " << g.self_loops_dropped() << " self-loops\n";
  write_edge_list(run.path("edges.tsv").string(), g);
  write_features_csv(run.path("features.csv").string(), g.features());
  write_labels_csv(run.path("labels.csv").string(), g.labels());
  write_id_map(run.path("id_map.csv").string(), ingested.id_map);
  manifest_add(run, {"edges.tsv", "features.csv", "labels.csv", "id_map.csv"});
  std::cout << "ingested " << g.node_count() << " nodes, " << g.edge_count() << " edges\n";
  return 0;
}

int cmd_partition(const Run& run) {
  auto g = load_dataset(run);
  auto assignment = partition_assignment(
      *g, parse_partition_scheme(run.cfg.at("partition").at("scheme").get<std::string>()),
      run.cfg.at("partition").at("k").get<int>(), derive_seed(run.seed, "partition"));
  {
    std::ofstream out(run.path("partition.csv"));
    out << "# " << run.stamp() << "\nnode,client\n";
    for (size_t v = 0; v < assignment.size(); ++v) out << v << "," << assignment[v] << "\n";
  }
  json summary{{"config_hash", run.config_hash},
               {"master_seed", run.seed},
               {"n", g->node_count()},
               {"m", g->edge_count()},
               {"cut_fraction", cut_fraction(*g, assignment)}};
  std::ofstream(run.path("partition_summary.json")) << summary.dump(2) << "\n";
  manifest_add(run, {"partition.csv", "partition_summary.json"});
  std::cout << "partitioned: cut fraction " << cut_fraction(*g, assignment) << "\n";
  return 0;
}

int cmd_offline(const Run& run) {
  auto g = load_dataset(run);
  auto views = load_views(run, g);
  const int r = run.cfg.at("r").get<int>();
  const Backend backend = parse_backend(run.cfg.at("backend").get<std::string>());
  Transcript transcript;
  auto dec = decentralized_arnoldi(views, r, derive_seed(run.seed, "offline"), backend,
                                   &transcript);
  auto bases = client_bases(dec, dec.steps());
  std::vector<std::string> files;
  for (size_t i = 0; i < bases.size(); ++i) {
    SpectralBasis client{bases[i].u_rows, bases[i].lambda};
    const std::string name = "basis_client_" + std::to_string(i) + ".bin";
    write_basis(run.path(name).string(), client, run.config_hash, run.seed);
    files.push_back(name);
    files.push_back(name + ".json");
  }
  SpectralBasis global = assemble_basis(views, bases);
  write_basis(run.path("basis.bin").string(), global, run.config_hash, run.seed);
  transcript.write_jsonl(run.path("transcript.jsonl").string());
  write_comm_csv(run.path("comm_report.csv").string(), comm_report(transcript), run.stamp());
  files.insert(files.end(), {"basis.bin", "basis.bin.json", "transcript.jsonl",
                             "comm_report.csv"});
  manifest_add(run, files);
  std::cout << "offline: " << dec.steps() << " Krylov steps, residual " << dec.residual_norm
            << ", transcript " << transcript.log.size() << " messages\n";
  return 0;
}

int cmd_train(const Run& run) {
  auto g = load_dataset(run);
  auto views = load_views(run, g);
  TrainConfig cfg = train_config(run);
  LabelSplit split = make_split(run, *g, views);
  SpectralBasis basis;
  const SpectralBasis* basis_ptr = nullptr;
  if (cfg.mode == TrainMode::Spectral && cfg.structure_head) {
    const fs::path bpath = run.path("basis.bin");
    if (!fs::exists(bpath))
      throw MissingArtifactError("missing offline basis " + bpath.string() +
                                 "; run the offline phase first");
    basis = read_basis(bpath.string());
    if (basis.rank() > cfg.r) {
      basis.u = basis.u.leftCols(cfg.r).eval();
      basis.lambda = basis.lambda.head(cfg.r).eval();
    }
    basis_ptr = &basis;
  }
  TrainResult result = fedsgd_train(views, basis_ptr, cfg, split);
  write_metrics_csv(run.path("metrics.csv").string(), result.metrics, run.stamp());
  write_checkpoint(run.path("checkpoint.bin").string(), result.state, run.config_hash,
                   run.seed);
  result.transcript.write_jsonl(run.path("train_transcript.jsonl").string());
  manifest_add(run, {"metrics.csv", "checkpoint.bin", "checkpoint.bin.json",
                     "train_transcript.jsonl"});
  const auto& last = result.metrics.back();
  std::cout << "train: final loss " << last.train_loss << ", test accuracy " << last.test_acc
            << "\n";
  return 0;
}

int cmd_attack(const Run& run) {
  const json& atk = run.cfg.at("attack");
  std::vector<std::pair<double, int>> pairs;
  for (const auto& pr : atk.at("pairs"))
    pairs.emplace_back(pr[0].get<double>(), pr[1].get<int>());
  auto r_grid = atk.at("r_grid").get<std::vector<int>>();
  std::sort(r_grid.begin(), r_grid.end());

  auto sweep = r_sweep(pairs, r_grid);
  write_sweep_csv(run.path("sweep.csv").string(), sweep, run.stamp());

  bool first = true;
  for (auto [p, n] : pairs)
    for (int r : r_grid) {
      AttackSetting setting;
      setting.p = p;
      setting.n = n;
      setting.r = r;
      write_curves_csv(run.path("curves.csv").string(), theory_curves(setting), p, n, r,
                       "theory", !first, run.stamp());
      first = false;
    }

  json summary{{"config_hash", run.config_hash}, {"master_seed", run.seed}};
  // smallest r in the grid whose max(P+R) crosses the trivial line
  json thresholds = json::array();
  for (auto [p, n] : pairs) {
    int threshold_r = -1;
    for (const auto& row : sweep)
      if (row.p == p && row.n == n && row.max_precision_plus_recall > 1.02) {
        threshold_r = row.r;
        break;
      }
    thresholds.push_back({{"p", p}, {"n", n}, {"first_r_above_1.02", threshold_r}});
  }
  summary["thresholds"] = thresholds;

  if (!atk.at("theory_only").get<bool>()) {
    const json& emp = atk.at("empirical");
    AttackSetting setting;
    setting.n = emp.at("n_target").get<int>();
    setting.p = emp.at("p").get<double>();
    setting.r = emp.at("r").get<int>();
    auto runres = run_attack(setting, emp.at("n_attacker").get<int>(),
                             emp.at("trials").get<int>(), derive_seed(run.seed, "attack"));
    write_curves_csv(run.path("curves.csv").string(), runres.theory, setting.p, setting.n,
                     setting.r, "theory-empirical-setting", true);
    write_curves_csv(run.path("curves.csv").string(), runres.strong, setting.p, setting.n,
                     setting.r, "empirical-strong", true);
    write_curves_csv(run.path("curves.csv").string(), runres.realistic, setting.p, setting.n,
                     setting.r, "empirical-realistic", true);
    double worst_excess = 0.0;
    for (const auto& pt : runres.realistic)
      worst_excess = std::max(worst_excess, pt.precision -
                                                precision_at_recall(runres.theory, pt.recall));
    summary["empirical"] = {{"alpha_mean", runres.alpha_mean},
                            {"worst_precision_excess_over_theory", worst_excess},
                            {"dominated_by_theory", worst_excess <= 0.05}};

    // LLR-theory validation per setting, on a basis estimate satisfying the
    // delocalization assumptions
    const json& val = atk.at("validation");
    const int val_r = val.at("r").get<int>();
    const int val_samples = val.at("samples").get<int>();
    auto validate_at = [&](int n, double p, std::uint64_t salt) {
      Rng rng(derive_seed(run.seed, "attack-validation", salt));
      Eigen::MatrixXd q(n, val_r);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < val_r; ++j) q(i, j) = rng.normal();
      q = Eigen::MatrixXd(Eigen::HouseholderQR<Eigen::MatrixXd>(q).householderQ() *
                          Eigen::MatrixXd::Identity(n, val_r));
      TheoremCheck check =
          validate_llr_theory(q, p, 0, val_samples, derive_seed(run.seed, "vmc", salt));
      return json{{"n", n},          {"p", p},
                  {"r", val_r},      {"alpha", check.alpha},
                  {"mean_h1", check.mean_h1}, {"mean_h0", check.mean_h0},
                  {"var_h1", check.var_h1},   {"ks", check.ks},
                  {"ks_below_0.02", check.ks <= 0.02}};
    };
    json validations = json::array();
    validations.push_back(validate_at(val.at("n").get<int>(), val.at("p").get<double>(), 0));
    std::uint64_t salt = 1;
    for (auto [p, n] : pairs) validations.push_back(validate_at(n, p, salt++));
    summary["validation"] = validations;
  }
  std::ofstream(run.path("attack_summary.json")) << summary.dump(2) << "\n";
  manifest_add(run, {"sweep.csv", "curves.csv", "attack_summary.json"});
  std::cout << "attack: " << sweep.size() << " sweep rows\n";
  return 0;
}

int cmd_report(const Run& run) {
  // offline communication scaling: counts over a grid of (r, K, n), the
  // fitted leading coefficient of c * r * K * n
  std::vector<RknSample> samples;
  for (int n : {200, 400, 600})
    for (int k : {2, 4, 6})
      for (int r : {4, 6, 8}) {
        auto g = std::make_shared<Graph>(
            bernoulli_graph(n, 8.0 / n, derive_seed(run.seed, "report-graph", n)));
        auto views = partition(g, PartitionScheme::Random, k, derive_seed(run.seed, "rp"));
        Transcript transcript;
        decentralized_arnoldi(views, r, derive_seed(run.seed, "report"), Backend::Mock,
                              &transcript);
        samples.push_back({r, k, n, total_scalars(transcript)});
      }
  const double c = fit_rkn_coefficient(samples);
  {
    std::ofstream out(run.path("report.csv"));
    out << "# " << run.stamp() << "\nr,k,n,scalars,predicted\n";
    for (const auto& s : samples)
      out << s.r << "," << s.k << "," << s.n << "," << s.scalars << ","
          << c * s.r * s.k * s.n << "\n";
  }
  json report{{"config_hash", run.config_hash},
              {"master_seed", run.seed},
              {"leading_coefficient", c},
              {"samples", samples.size()}};
  std::ofstream(run.path("report.json")) << report.dump(2) << "\n";
  manifest_add(run, {"report.csv", "report.json"});
  std::cout << "report: fitted coefficient " << c << " over " << samples.size() << " runs\n";
  return 0;
}

int cmd_verify(const Run& run) {
  const fs::path mpath = run.path("manifest.json");
  if (!fs::exists(mpath)) throw MissingArtifactError("no manifest at " + mpath.string());
  std::ifstream in(mpath);
  json manifest = json::parse(in);
  int checked = 0;
  for (auto it = manifest.at("files").begin(); it != manifest.at("files").end(); ++it) {
    const fs::path f = run.path(it.key());
    if (!fs::exists(f)) throw MissingArtifactError("missing output file " + f.string());
    if (sha256_file(f.string()) != it->get<std::string>())
      throw MissingArtifactError("checksum mismatch for " + f.string());
    ++checked;
  }
  const std::string hash = manifest.at("config_hash").get<std::string>();
  // every text output embeds the same stamp
  for (auto it = manifest.at("files").begin(); it != manifest.at("files").end(); ++it) {
    const fs::path f = run.path(it.key());
    if (f.extension() != ".csv") continue;
    std::ifstream csv(f);
    std::string line;
    std::getline(csv, line);
    if (line.find(hash) == std::string::npos)
      throw MissingArtifactError("missing config stamp in " + f.string());
  }
  std::cout << "verify: " << checked << " files ok\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"subgraph federated learning with spectral Laplacian smoothing"};
  app.require_subcommand(1);

  json cfg = default_config();
  std::string config_file, out_dir, scheme, mode, backend, label_split;
  int k = 0, r = 0, epochs = 0, d_s = 0;
  double lr = 0, lambda_reg = 0, weight_decay = 0;
  std::uint64_t seed = 0;

  app.add_option("--config", config_file, "JSON config file; overrides flags");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--scheme", scheme, "partition scheme: random | bfs-community");
  app.add_option("--k", k, "client count");
  app.add_option("--mode", mode, "fedlap | fedlap-plus");
  app.add_option("--r", r, "spectral rank");
  app.add_option("--backend", backend, "mock | mask");
  app.add_option("--epochs", epochs, "training epochs");
  app.add_option("--lr", lr, "learning rate");
  app.add_option("--lambda-reg", lambda_reg, "regularizer weight");
  app.add_option("--weight-decay", weight_decay, "weight decay");
  app.add_option("--d-s", d_s, "structure feature dimension");
  app.add_option("--label-split", label_split, "global-stratified | per-client-uniform");

  auto* ingest = app.add_subcommand("ingest", "normalize an external dataset");
  std::string edges_path, features_path, labels_path;
  ingest->add_option("--edges", edges_path, "edge list (u<TAB>v)")->required();
  ingest->add_option("--features", features_path, "feature CSV")->required();
  ingest->add_option("--labels", labels_path, "label CSV (node_id,label)");

  auto* cmd_part = app.add_subcommand("partition", "split the graph into client views");
  auto* offline = app.add_subcommand("offline", "decentralized spectral factorization");
  auto* train = app.add_subcommand("train", "federated training");
  auto* attack = app.add_subcommand("attack", "privacy lab: theory and empirical curves");
  auto* report = app.add_subcommand("report", "communication scaling fit");
  auto* verify = app.add_subcommand("verify", "re-hash outputs against the manifest");
  for (auto* sc : {ingest, cmd_part, offline, train, attack, report, verify})
    sc->fallthrough();

  try {
    app.parse(argc, argv);

    // flags first, then an explicit config file wins
    const auto set = [&](const char* name) { return app.count(name) > 0; };
    if (set("--out")) cfg["out_dir"] = out_dir;
    if (set("--seed")) cfg["master_seed"] = seed;
    if (set("--scheme")) cfg["partition"]["scheme"] = scheme;
    if (set("--k")) cfg["partition"]["k"] = k;
    if (set("--mode")) cfg["mode"] = mode;
    if (set("--r")) cfg["r"] = r;
    if (set("--backend")) cfg["backend"] = backend;
    if (set("--epochs")) cfg["train"]["epochs"] = epochs;
    if (set("--lr")) cfg["train"]["learning_rate"] = lr;
    if (set("--lambda-reg")) cfg["train"]["lambda_reg"] = lambda_reg;
    if (set("--weight-decay")) cfg["train"]["weight_decay"] = weight_decay;
    if (set("--d-s")) cfg["train"]["d_s"] = d_s;
    if (set("--label-split")) cfg["train"]["label_split"] = label_split;
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) throw ConfigError("cannot open config file " + config_file);
      json file_cfg = json::parse(in, nullptr, false);
      if (file_cfg.is_discarded()) throw ConfigError("invalid JSON in " + config_file);
      merge_over(cfg, file_cfg);
    }
    Run run = make_run(cfg);

    if (*ingest) return cmd_ingest(run, edges_path, features_path, labels_path);
    if (*cmd_part) return cmd_partition(run);
    if (*offline) return cmd_offline(run);
    if (*train) return cmd_train(run);
    if (*attack) return cmd_attack(run);
    if (*report) return cmd_report(run);
    if (*verify) return cmd_verify(run);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << json{{"error", "config"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << json{{"error", "config"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << json{{"error", "numeric"}, {"message", e.what()}}.dump() << "\n";
    return 3;
  } catch (const MissingArtifactError& e) {
    std::cerr << json{{"error", "missing-artifact"}, {"message", e.what()}}.dump() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
}
