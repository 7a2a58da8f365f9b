#include "pgc/graph.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pgc/rng.hpp"

namespace pgc {

using nlohmann::json;

void DatasetMeta::validate() const {
  if (m < 1) throw DataError("meta: m must be >= 1");
  if (n_x < 1) throw DataError("meta: n_x must be >= 1");
  if (n_a < 2) throw DataError("meta: n_a must be >= 2 (category 0 is the no-edge category)");
}

void GraphInstance::validate(const DatasetMeta& meta) const {
  if (n < 1 || n > meta.m)
    throw DataError("graph: node count " + std::to_string(n) + " outside [1, m=" +
                    std::to_string(meta.m) + "]");
  if (static_cast<int>(node_labels.size()) != n)
    throw DataError("graph: node_labels length mismatch");
  if (static_cast<int>(edge_labels.size()) != n * (n - 1) / 2)
    throw DataError("graph: edge_labels length must be n(n-1)/2");
  for (auto c : node_labels)
    if (c < 0 || c >= meta.n_x)
      throw DataError("graph: node label " + std::to_string(c) + " outside [0, n_x)");
  for (auto c : edge_labels)
    if (c < 0 || c >= meta.n_a)
      throw DataError("graph: edge label " + std::to_string(c) + " outside [0, n_a)");
}

void Permutation::validate() const {
  std::vector<bool> seen(map.size(), false);
  for (auto v : map) {
    if (v < 0 || v >= static_cast<std::int32_t>(map.size()) || seen[v])
      throw DataError("permutation: not a bijection on [0, n)");
    seen[v] = true;
  }
}

Permutation Permutation::inverse() const {
  Permutation inv;
  inv.map.assign(map.size(), 0);
  for (std::size_t i = 0; i < map.size(); ++i) inv.map[map[i]] = static_cast<std::int32_t>(i);
  return inv;
}

Permutation Permutation::identity(int n) {
  Permutation p;
  p.map.resize(n);
  for (int i = 0; i < n; ++i) p.map[i] = i;
  return p;
}

std::int32_t PaddedGraph::node_value(int i) const {
  if (node_mask[i]) return kMarginalized;
  for (int c = 0; c < n_x; ++c)
    if (node_onehot[static_cast<std::size_t>(i) * n_x + c]) return c;
  throw DataError("padded graph: unmasked node row is not one-hot");
}

std::int32_t PaddedGraph::edge_value(int e) const {
  if (edge_mask[e]) return kMarginalized;
  for (int c = 0; c < n_a; ++c)
    if (edge_onehot[static_cast<std::size_t>(e) * n_a + c]) return c;
  throw DataError("padded graph: unmasked edge row is not one-hot");
}

std::vector<std::int32_t> PaddedGraph::node_assignment() const {
  std::vector<std::int32_t> out(m);
  for (int i = 0; i < m; ++i) out[i] = node_value(i);
  return out;
}

std::vector<std::int32_t> PaddedGraph::edge_assignment() const {
  const int e_count = m * (m - 1) / 2;
  std::vector<std::int32_t> out(e_count);
  for (int e = 0; e < e_count; ++e) out[e] = edge_value(e);
  return out;
}

PaddedGraph pad(const GraphInstance& g, const DatasetMeta& meta) {
  meta.validate();
  g.validate(meta);
  PaddedGraph p;
  p.m = meta.m;
  p.n_x = meta.n_x;
  p.n_a = meta.n_a;
  const int e_count = meta.num_edge_vars();
  p.node_onehot.assign(static_cast<std::size_t>(meta.m) * meta.n_x, 0);
  p.edge_onehot.assign(static_cast<std::size_t>(e_count) * meta.n_a, 0);
  p.node_mask.assign(meta.m, false);
  p.edge_mask.assign(e_count, false);

  for (int i = 0; i < meta.m; ++i) {
    if (i < g.n) {
      p.node_onehot[static_cast<std::size_t>(i) * meta.n_x + g.node_labels[i]] = 1;
    } else {
      p.node_mask[i] = true;
    }
  }
  for (int i = 1; i < meta.m; ++i) {
    for (int j = 0; j < i; ++j) {
      const int e = tri_index(i, j);
      if (i < g.n) {
        p.edge_onehot[static_cast<std::size_t>(e) * meta.n_a + g.edge_labels[e]] = 1;
      } else {
        p.edge_mask[e] = true;  // touches a masked node
      }
    }
  }
  return p;
}

GraphInstance unpad(const PaddedGraph& p) {
  GraphInstance g;
  int n = 0;
  while (n < p.m && !p.node_mask[n]) ++n;
  for (int i = n; i < p.m; ++i)
    if (!p.node_mask[i]) throw DataError("padded graph: mask is not a suffix");
  g.n = n;
  g.node_labels.resize(n);
  for (int i = 0; i < n; ++i) g.node_labels[i] = p.node_value(i);
  g.edge_labels.resize(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 1; i < n; ++i)
    for (int j = 0; j < i; ++j) g.edge_labels[tri_index(i, j)] = p.edge_value(tri_index(i, j));
  return g;
}

GraphInstance permute(const GraphInstance& g, const Permutation& p) {
  if (p.size() != g.n) throw DataError("permute: permutation size != node count");
  p.validate();
  GraphInstance out;
  out.n = g.n;
  out.node_labels.resize(g.n);
  out.edge_labels.assign(g.edge_labels.size(), 0);
  for (int i = 0; i < g.n; ++i) out.node_labels[i] = g.node_labels[p.map[i]];
  for (int i = 1; i < g.n; ++i)
    for (int j = 0; j < i; ++j)
      out.edge_labels[tri_index(i, j)] = g.edge(p.map[i], p.map[j]);
  return out;
}

std::string graph_to_json_line(const GraphInstance& g) {
  json rec;
  rec["nodes"] = g.node_labels;
  json edges = json::array();
  for (int i = 1; i < g.n; ++i)
    for (int j = 0; j < i; ++j) {
      const auto c = g.edge_labels[tri_index(i, j)];
      if (c != 0) edges.push_back({i, j, c});
    }
  rec["edges"] = edges;
  return rec.dump();
}

GraphInstance graph_from_json_line(const std::string& line, const DatasetMeta& meta) {
  json rec = json::parse(line);
  if (!rec.contains("nodes") || !rec["nodes"].is_array())
    throw DataError("record: missing \"nodes\" array");
  GraphInstance g;
  g.node_labels = rec["nodes"].get<std::vector<std::int32_t>>();
  g.n = static_cast<int>(g.node_labels.size());
  if (g.n < 1) throw DataError("record: empty node list");
  g.edge_labels.assign(static_cast<std::size_t>(g.n) * (g.n - 1) / 2, 0);
  if (rec.contains("edges")) {
    for (const auto& e : rec["edges"]) {
      if (!e.is_array() || e.size() != 3) throw DataError("record: edge entries must be [i, j, c]");
      const int i = e[0].get<int>(), j = e[1].get<int>();
      const std::int32_t c = e[2].get<std::int32_t>();
      if (i <= j || j < 0 || i >= g.n) throw DataError("record: edge endpoints must satisfy n > i > j >= 0");
      if (c < 1) throw DataError("record: explicit edge category must be >= 1");
      g.edge_labels[tri_index(i, j)] = c;
    }
  }
  g.validate(meta);
  return g;
}

std::vector<GraphInstance> load_dataset(const std::string& path, const DatasetMeta& meta) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  std::vector<GraphInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(graph_from_json_line(line, meta));
    } catch (const std::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void save_dataset(const std::string& path, std::span<const GraphInstance> data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset file: " + path);
  for (const auto& g : data) out << graph_to_json_line(g) << '\n';
}

DatasetMeta load_meta(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open meta file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  DatasetMeta meta;
  meta.m = j.at("m").get<int>();
  meta.n_x = j.at("n_x").get<int>();
  meta.n_a = j.at("n_a").get<int>();
  if (j.contains("atom_names")) meta.atom_names = j["atom_names"].get<std::vector<std::string>>();
  meta.validate();
  return meta;
}

void save_meta(const std::string& path, const DatasetMeta& meta) {
  json j;
  j["m"] = meta.m;
  j["n_x"] = meta.n_x;
  j["n_a"] = meta.n_a;
  if (!meta.atom_names.empty()) j["atom_names"] = meta.atom_names;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write meta file: " + path);
  out << j.dump(2) << '\n';
}

DatasetSplit split_dataset(std::span<const GraphInstance> data,
                           double train_ratio, double valid_ratio, double test_ratio,
                           std::uint64_t seed) {
  if (std::abs(train_ratio + valid_ratio + test_ratio - 1.0) > 1e-9)
    throw DataError("split: ratios must sum to 1");
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(derive_seed(seed, 51));
  rng.shuffle(std::span<std::size_t>(idx));
  const auto n = data.size();
  auto n_train = static_cast<std::size_t>(std::floor(train_ratio * static_cast<double>(n) + 0.5));
  n_train = std::min(n_train, n);
  auto n_valid = static_cast<std::size_t>(std::floor(valid_ratio * static_cast<double>(n) + 0.5));
  n_valid = std::min(n_valid, n - n_train);
  DatasetSplit s;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& g = data[idx[k]];
    if (k < n_train) {
      s.train.push_back(g);
    } else if (k < n_train + n_valid) {
      s.valid.push_back(g);
    } else {
      s.test.push_back(g);
    }
  }
  return s;
}

}  // namespace pgc
