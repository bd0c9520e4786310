#include "fedlap/graph_io.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fedlap/errors.hpp"

namespace fedlap {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  return cells;
}

bool is_number(const std::string& s) {
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("cannot open " + path);
  return in;
}

}  // namespace

IngestedDataset read_edge_list(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  IngestedDataset out;
  std::map<std::string, int> id_of;
  auto intern = [&](const std::string& name) {
    auto [it, inserted] = id_of.emplace(name, out.node_count);
    if (inserted) {
      out.id_map.emplace_back(name, out.node_count);
      ++out.node_count;
    }
    return it->second;
  };
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected u<TAB>v");
    std::string u = trim(line.substr(0, tab));
    std::string v = trim(line.substr(tab + 1));
    if (u.empty() || v.empty())
      throw ConfigError(path + ":" + std::to_string(lineno) + ": empty endpoint");
    const int du = intern(u);  // keep first-appearance order independent of
    const int dv = intern(v);  // argument evaluation order
    out.edges.emplace_back(du, dv);
  }
  return out;
}

Eigen::MatrixXd read_features_csv(const std::string& path, int node_count) {
  std::ifstream in = open_or_throw(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (first) {
      first = false;
      bool header = std::any_of(cells.begin(), cells.end(),
                                [](const std::string& c) { return !is_number(c); });
      if (header) continue;
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      if (!is_number(c)) throw ConfigError(path + ": non-numeric feature cell '" + c + "'");
      row.push_back(std::strtod(c.c_str(), nullptr));
    }
    rows.push_back(std::move(row));
  }
  if (static_cast<int>(rows.size()) != node_count)
    throw ConfigError(path + ": " + std::to_string(rows.size()) + " feature rows for " +
                      std::to_string(node_count) + " nodes");
  const int d = rows.empty() ? 0 : static_cast<int>(rows[0].size());
  Eigen::MatrixXd feats(node_count, d);
  for (int i = 0; i < node_count; ++i) {
    if (static_cast<int>(rows[i].size()) != d)
      throw ConfigError(path + ": ragged feature row " + std::to_string(i));
    for (int j = 0; j < d; ++j) feats(i, j) = rows[i][j];
  }
  return feats;
}

std::vector<int> read_labels_csv(const std::string& path, const std::map<std::string, int>& id_of,
                                 int node_count, std::vector<std::string>* class_names) {
  std::ifstream in = open_or_throw(path);
  std::vector<std::pair<int, std::string>> raw;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != 2) throw ConfigError(path + ": expected node_id,label");
    if (first) {
      first = false;
      if (!id_of.count(cells[0]) && !is_number(cells[0])) continue;  // header
    }
    auto it = id_of.find(cells[0]);
    if (it == id_of.end())
      throw ConfigError(path + ": label for unknown node '" + cells[0] + "'");
    raw.emplace_back(it->second, cells[1]);
  }
  std::vector<std::string> classes;
  for (auto& [node, name] : raw) classes.push_back(name);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  std::vector<int> labels(static_cast<size_t>(node_count), -1);
  for (auto& [node, name] : raw)
    labels[node] = static_cast<int>(
        std::lower_bound(classes.begin(), classes.end(), name) - classes.begin());
  if (class_names) *class_names = std::move(classes);
  return labels;
}

void write_id_map(const std::string& path, const std::vector<std::pair<std::string, int>>& map) {
  std::ofstream out(path);
  out << "external_id,dense_id\n";
  for (auto& [ext, dense] : map) out << ext << "," << dense << "\n";
}

std::map<std::string, int> read_id_map(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::map<std::string, int> map;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != 2) throw ConfigError(path + ": expected external_id,dense_id");
    if (first) {
      first = false;
      if (!is_number(cells[1])) continue;
    }
    map.emplace(cells[0], std::atoi(cells[1].c_str()));
  }
  return map;
}

void write_edge_list(const std::string& path, const Graph& g) {
  std::ofstream out(path);
  out << "# " << g.node_count() << " nodes, " << g.edge_count() << " edges\n";
  for (auto [u, v] : g.edges()) out << u << "\t" << v << "\n";
}

void write_features_csv(const std::string& path, const Eigen::MatrixXd& feats) {
  std::ofstream out(path);
  out.precision(17);
  for (Eigen::Index i = 0; i < feats.rows(); ++i) {
    for (Eigen::Index j = 0; j < feats.cols(); ++j) {
      if (j) out << ",";
      out << feats(i, j);
    }
    out << "\n";
  }
}

void write_labels_csv(const std::string& path, const std::vector<int>& labels) {
  std::ofstream out(path);
  out << "node_id,label\n";
  for (size_t v = 0; v < labels.size(); ++v)
    if (labels[v] >= 0) out << v << "," << labels[v] << "\n";
}

std::vector<int> read_dense_labels_csv(const std::string& path, int node_count) {
  std::ifstream in = open_or_throw(path);
  std::vector<int> labels(static_cast<size_t>(node_count), -1);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != 2) throw ConfigError(path + ": expected node_id,label");
    if (first) {
      first = false;
      if (!is_number(cells[0])) continue;
    }
    int v = std::atoi(cells[0].c_str());
    if (v < 0 || v >= node_count) throw ConfigError(path + ": node id out of range");
    labels[v] = std::atoi(cells[1].c_str());
  }
  return labels;
}

}  // namespace fedlap
