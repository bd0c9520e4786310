#pragma once

#include <map>
#include <string>
#include <vector>

#include "fedlap/graph.hpp"

namespace fedlap {

// File ingestion. Node ids in the input may be arbitrary strings; they are
// remapped to dense integers in first-appearance order and the mapping is
// persisted so later files (labels, predictions) can be joined back.
//
// Formats:
//   edge list  one "u<TAB>v" per line, '#' starts a comment
//   features   CSV, one row per node (dense id order), optional header
//   labels     CSV "node_id,label"
//   id map     CSV "external_id,dense_id"

struct IngestedDataset {
  std::vector<std::pair<int, int>> edges;
  std::vector<std::pair<std::string, int>> id_map;  // external -> dense, insertion order
  int node_count = 0;
};

IngestedDataset read_edge_list(const std::string& path);

// Features for node_count nodes; infers and skips a header row if the first
// line has any non-numeric cell. Label values may be strings; they are mapped
// to class indices in sorted order.
Eigen::MatrixXd read_features_csv(const std::string& path, int node_count);
std::vector<int> read_labels_csv(const std::string& path,
                                 const std::map<std::string, int>& id_of, int node_count,
                                 std::vector<std::string>* class_names = nullptr);

void write_id_map(const std::string& path, const std::vector<std::pair<std::string, int>>& map);
std::map<std::string, int> read_id_map(const std::string& path);

void write_edge_list(const std::string& path, const Graph& g);
void write_features_csv(const std::string& path, const Eigen::MatrixXd& feats);
void write_labels_csv(const std::string& path, const std::vector<int>& labels);
std::vector<int> read_dense_labels_csv(const std::string& path, int node_count);

}  // namespace fedlap
