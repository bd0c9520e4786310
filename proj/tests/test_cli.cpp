#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "fedlap/basis_io.hpp"
#include "fedlap/graph.hpp"
#include "fedlap/rng.hpp"
#include "fedlap/sha256.hpp"
#include "fedlap/spectral.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string binary() {
  const char* bin = std::getenv("FEDLAP_BIN");
  REQUIRE(bin != nullptr);
  return bin;
}

int run_cli(const std::string& args) {
  const std::string cmd = binary() + " " + args + " >/dev/null 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

size_t data_rows(const fs::path& csv) {
  std::ifstream in(csv);
  std::string line;
  size_t rows = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!seen_header) {
      seen_header = true;
      continue;
    }
    ++rows;
  }
  return rows;
}

}  // namespace

TEST_CASE("cli: offline is deterministic across reruns") {
  fs::path a = fresh_dir("fedlap_cli_det_a");
  fs::path b = fresh_dir("fedlap_cli_det_b");
  const std::string common = " --k 4 --r 6 --seed 11 --out ";
  REQUIRE(run_cli("offline" + common + a.string()) == 0);
  REQUIRE(run_cli("offline" + common + b.string()) == 0);
  CHECK(fedlap::sha256_file((a / "basis.bin").string()) ==
        fedlap::sha256_file((b / "basis.bin").string()));
  CHECK(fedlap::sha256_file((a / "transcript.jsonl").string()) ==
        fedlap::sha256_file((b / "transcript.jsonl").string()));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("cli: K=1 offline basis matches the centralized solver byte for byte") {
  fs::path dir = fresh_dir("fedlap_cli_k1");
  json cfg{{"dataset", {{"type", "bernoulli"}, {"n", 40}, {"p", 0.15}}},
           {"partition", {{"scheme", "random"}, {"k", 1}}},
           {"r", 5},
           {"backend", "mock"},
           {"out_dir", dir.string()},
           {"master_seed", 3}};
  std::ofstream(dir / "config.json") << cfg.dump();
  REQUIRE(run_cli("offline --config " + (dir / "config.json").string()) == 0);

  // centralized reference with the same derived seeds
  using namespace fedlap;
  auto g = std::make_shared<Graph>(
      bernoulli_graph(40, 0.15, derive_seed(3, "dataset")));
  Laplacian l(g);
  auto f = arnoldi(l, 5, arnoldi_start_vector(40, derive_seed(3, "offline")));
  SpectralBasis basis = spectral_basis(f, f.steps());
  const std::string ref = (dir / "reference.bin").string();
  const std::string config_hash = [&] {
    std::ifstream in(dir / "manifest.json");
    return json::parse(in).at("config_hash").get<std::string>();
  }();
  write_basis(ref, basis, config_hash, 3);
  CHECK(sha256_file(ref) == sha256_file((dir / "basis.bin").string()));
  fs::remove_all(dir);
}

TEST_CASE("cli: train emits one metrics row per epoch and a valid checkpoint") {
  fs::path dir = fresh_dir("fedlap_cli_train");
  const std::string common = " --k 3 --r 6 --seed 7 --out " + dir.string();
  REQUIRE(run_cli("offline" + common) == 0);
  REQUIRE(run_cli("train" + common + " --epochs 1") == 0);
  CHECK(data_rows(dir / "metrics.csv") == 1);
  REQUIRE(run_cli("train" + common + " --epochs 4") == 0);
  CHECK(data_rows(dir / "metrics.csv") == 4);
  CHECK(fs::exists(dir / "checkpoint.bin.json"));
  fs::remove_all(dir);
}

TEST_CASE("cli: structure-off arms agree regardless of lambda_reg") {
  fs::path a = fresh_dir("fedlap_cli_arm_a");
  fs::path b = fresh_dir("fedlap_cli_arm_b");
  json base{{"dataset",
             {{"type", "sbm"}, {"block_sizes", {30, 30}}, {"p_in", 0.2}, {"p_out", 0.02}}},
            {"partition", {{"scheme", "random"}, {"k", 2}}},
            {"mode", "fedlap-plus"},
            {"r", 4},
            {"train", {{"epochs", 6}, {"structure_head", false}, {"lambda_reg", 0.0}}},
            {"master_seed", 9}};
  json other = base;
  other["train"]["lambda_reg"] = 7.5;
  base["out_dir"] = a.string();
  other["out_dir"] = b.string();
  std::ofstream(a / "config.json") << base.dump();
  std::ofstream(b / "config.json") << other.dump();
  REQUIRE(run_cli("train --config " + (a / "config.json").string()) == 0);
  REQUIRE(run_cli("train --config " + (b / "config.json").string()) == 0);
  // metrics bodies match line for line (headers differ by config hash)
  auto body = [](const fs::path& p) {
    std::ifstream in(p / "metrics.csv");
    std::string line, out;
    while (std::getline(in, line))
      if (!line.empty() && line[0] != '#') out += line + "\n";
    return out;
  };
  CHECK(body(a) == body(b));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("cli: attack theory-only fast path") {
  fs::path dir = fresh_dir("fedlap_cli_attack");
  json cfg{{"attack",
            {{"pairs", {{0.0139, 2277}}}, {"r_grid", {100, 175, 350}}, {"theory_only", true}}},
           {"out_dir", dir.string()},
           {"master_seed", 2}};
  std::ofstream(dir / "config.json") << cfg.dump();
  REQUIRE(run_cli("attack --config " + (dir / "config.json").string()) == 0);
  CHECK(data_rows(dir / "sweep.csv") == 3);
  CHECK(data_rows(dir / "curves.csv") == 3 * 201);
  std::ifstream in(dir / "attack_summary.json");
  json summary = json::parse(in);
  CHECK(summary.contains("thresholds"));
  fs::remove_all(dir);
}

TEST_CASE("cli: report fits a positive leading coefficient") {
  fs::path dir = fresh_dir("fedlap_cli_report");
  REQUIRE(run_cli("report --seed 4 --out " + dir.string()) == 0);
  std::ifstream in(dir / "report.json");
  json report = json::parse(in);
  CHECK(report.at("leading_coefficient").get<double>() > 0.5);
  CHECK(report.at("leading_coefficient").get<double>() < 2.0);
  fs::remove_all(dir);
}

TEST_CASE("cli: verify passes on intact outputs and fails on corruption") {
  fs::path dir = fresh_dir("fedlap_cli_verify");
  const std::string common = " --k 2 --r 4 --seed 13 --out " + dir.string();
  REQUIRE(run_cli("offline" + common) == 0);
  CHECK(run_cli("verify" + common) == 0);
  {
    std::ofstream(dir / "comm_report.csv", std::ios::app) << "tampered\n";
  }
  CHECK(run_cli("verify" + common) == 4);
  fs::remove_all(dir);
}

TEST_CASE("cli: ingest normalizes string ids and round-trips through files datasets") {
  fs::path dir = fresh_dir("fedlap_cli_ingest");
  {
    std::ofstream e(dir / "raw_edges.tsv");
    e << "acct-a\tacct-b\nacct-b\tacct-c\nacct-c\tacct-a\nacct-a\tacct-a\n";
    std::ofstream f(dir / "raw_features.csv");
    f << "1,0\n0,1\n0.5,0.5\n";
    std::ofstream l(dir / "raw_labels.csv");
    l << "node_id,label\nacct-a,x\nacct-b,y\nacct-c,x\n";
  }
  REQUIRE(run_cli("ingest --edges " + (dir / "raw_edges.tsv").string() + " --features " +
                  (dir / "raw_features.csv").string() + " --labels " +
                  (dir / "raw_labels.csv").string() + " --out " + dir.string()) == 0);
  CHECK(fs::exists(dir / "id_map.csv"));
  CHECK(fs::exists(dir / "edges.tsv"));

  // the ingested directory works as a files dataset (self-loop was dropped)
  json cfg{{"dataset", {{"type", "files"}, {"dir", dir.string()}}},
           {"partition", {{"scheme", "random"}, {"k", 1}}},
           {"r", 2},
           {"out_dir", dir.string()},
           {"master_seed", 4}};
  std::ofstream(dir / "config.json") << cfg.dump();
  CHECK(run_cli("offline --config " + (dir / "config.json").string()) == 0);
  fs::remove_all(dir);
}

TEST_CASE("cli: exit codes for config errors and missing artifacts") {
  fs::path dir = fresh_dir("fedlap_cli_codes");
  CHECK(run_cli("train --mode bogus --out " + dir.string()) == 2);
  CHECK(run_cli("offline --k 0 --out " + dir.string()) == 2);
  // fedlap-plus training without the offline basis
  CHECK(run_cli("train --mode fedlap-plus --k 2 --r 4 --epochs 2 --out " + dir.string()) == 4);
  fs::remove_all(dir);
}
