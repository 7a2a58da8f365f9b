#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pgc/errors.hpp"

namespace pgc {

// Sentinel for a marginalized variable in assignments and query specs.
inline constexpr std::int32_t kMarginalized = -1;

// Fixed dataset dimensions. Edge category 0 always means "no edge", so
// n_a counts it (n_a >= 2).
struct DatasetMeta {
  int m = 0;    // maximum node count
  int n_x = 0;  // node categories
  int n_a = 0;  // edge categories, including the no-edge category 0
  std::vector<std::string> atom_names;

  int num_edge_vars() const { return m * (m - 1) / 2; }
  void validate() const;
};

// Flat index of the undirected pair (i, j), i > j, in row-flattened
// lower-triangular order: (1,0), (2,0), (2,1), (3,0), ...
inline int tri_index(int i, int j) {
  if (i <= j || j < 0) throw DataError("tri_index requires i > j >= 0");
  return i * (i - 1) / 2 + j;
}

// A variable-size attributed undirected graph. Node i has a category label
// in [0, n_x); the label of the pair (i, j), i > j, lives at
// edge_labels[tri_index(i, j)] with 0 meaning "no edge".
struct GraphInstance {
  int n = 0;
  std::vector<std::int32_t> node_labels;              // length n
  std::vector<std::int32_t> edge_labels;              // length n(n-1)/2

  std::int32_t edge(int i, int j) const {
    return edge_labels[static_cast<std::size_t>(tri_index(std::max(i, j), std::min(i, j)))];
  }
  void validate(const DatasetMeta& meta) const;
  bool operator==(const GraphInstance&) const = default;
};

// Bijection on [0, n): map[i] is the source index placed at position i.
struct Permutation {
  std::vector<std::int32_t> map;

  int size() const { return static_cast<int>(map.size()); }
  void validate() const;
  Permutation inverse() const;
  static Permutation identity(int n);
  bool operator==(const Permutation&) const = default;
};

// Fixed-size (m-variable) one-hot view of a graph with per-variable
// marginalization masks: mask true = variable marginalized out.
struct PaddedGraph {
  int m = 0;
  int n_x = 0;
  int n_a = 0;
  std::vector<std::uint8_t> node_onehot;  // m * n_x
  std::vector<std::uint8_t> edge_onehot;  // m(m-1)/2 * n_a
  std::vector<bool> node_mask;            // m
  std::vector<bool> edge_mask;            // m(m-1)/2

  std::int32_t node_value(int i) const;   // kMarginalized when masked
  std::int32_t edge_value(int e) const;
  // Per-variable categories with kMarginalized for masked entries.
  std::vector<std::int32_t> node_assignment() const;
  std::vector<std::int32_t> edge_assignment() const;
};

PaddedGraph pad(const GraphInstance& g, const DatasetMeta& meta);

// Recover the instance from a padded view (masked suffix defines n).
GraphInstance unpad(const PaddedGraph& p);

// Relabels node slots: node i of the result is node p.map[i] of g, and the
// edge between result slots (i, j) is the edge between the mapped sources,
// read from the lower triangle in either index order.
GraphInstance permute(const GraphInstance& g, const Permutation& p);

// JSON-lines dataset I/O. One graph per line:
//   {"nodes":[c0,...,c_{n-1}], "edges":[[i,j,c],...]}   with i > j, c >= 1.
// Absent pairs have the implicit no-edge category 0.
std::vector<GraphInstance> load_dataset(const std::string& path, const DatasetMeta& meta);
void save_dataset(const std::string& path, std::span<const GraphInstance> data);
std::string graph_to_json_line(const GraphInstance& g);
GraphInstance graph_from_json_line(const std::string& line, const DatasetMeta& meta);

// Meta file: {"m":..., "n_x":..., "n_a":..., "atom_names":[...]}.
DatasetMeta load_meta(const std::string& path);
void save_meta(const std::string& path, const DatasetMeta& meta);

struct DatasetSplit {
  std::vector<GraphInstance> train, valid, test;
};

// Deterministic seeded split; ratios must sum to 1.
DatasetSplit split_dataset(std::span<const GraphInstance> data,
                           double train_ratio, double valid_ratio, double test_ratio,
                           std::uint64_t seed);

}  // namespace pgc
