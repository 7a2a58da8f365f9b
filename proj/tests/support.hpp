#pragma once

// Shared fixtures and brute-force helpers for the test suites. Everything
// here recomputes expectations independently of the library's own fast
// paths.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "pgc/graph.hpp"
#include "pgc/model.hpp"
#include "pgc/ordering.hpp"
#include "pgc/rng.hpp"

namespace pgc::testing {

inline DatasetMeta tiny_meta() {
  DatasetMeta meta;
  meta.m = 3;
  meta.n_x = 2;
  meta.n_a = 2;
  return meta;
}

inline GraphInstance make_graph(std::vector<std::int32_t> nodes,
                                std::vector<std::tuple<int, int, std::int32_t>> edges) {
  GraphInstance g;
  g.n = static_cast<int>(nodes.size());
  g.node_labels = std::move(nodes);
  g.edge_labels.assign(static_cast<std::size_t>(g.n) * (g.n - 1) / 2, 0);
  for (const auto& [i, j, c] : edges)
    g.edge_labels[tri_index(std::max(i, j), std::min(i, j))] = c;
  return g;
}

// Path 0-1-2-...-(n-1), single-bond edges, all nodes category 0 unless given.
inline GraphInstance chain_graph(int n, std::int32_t node_label = 0, std::int32_t edge_label = 1) {
  GraphInstance g;
  g.n = n;
  g.node_labels.assign(n, node_label);
  g.edge_labels.assign(static_cast<std::size_t>(n) * (n - 1) / 2, 0);
  for (int i = 1; i < n; ++i) g.edge_labels[tri_index(i, i - 1)] = edge_label;
  return g;
}

inline std::vector<Permutation> all_permutations(int n) {
  std::vector<Permutation> out;
  Permutation p = Permutation::identity(n);
  do {
    out.push_back(p);
  } while (std::next_permutation(p.map.begin(), p.map.end()));
  return out;
}

// Scrambled labeled chains with n in [n_lo, n_hi]; node labels cycle.
inline std::vector<GraphInstance> scrambled_chains(int count, int n_lo, int n_hi,
                                                   const DatasetMeta& meta, std::uint64_t seed) {
  std::vector<GraphInstance> out;
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    const int n = n_lo + static_cast<int>(rng.uniform_int(n_hi - n_lo + 1));
    GraphInstance g = chain_graph(n);
    for (int v = 0; v < n; ++v) g.node_labels[v] = static_cast<std::int32_t>(v % meta.n_x);
    out.push_back(permute(g, order_random(g, rng.next_u64())));
  }
  return out;
}

// Chains emitted already sorted along the path (position-sensitive corpus).
inline std::vector<GraphInstance> sorted_chains(int count, int n_lo, int n_hi,
                                                const DatasetMeta& meta, std::uint64_t seed) {
  std::vector<GraphInstance> out;
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    const int n = n_lo + static_cast<int>(rng.uniform_int(n_hi - n_lo + 1));
    GraphInstance g = chain_graph(n);
    for (int v = 0; v < n; ++v) g.node_labels[v] = static_cast<std::int32_t>(v % meta.n_x);
    out.push_back(g);
  }
  return out;
}

// A small model spec over the given meta.
inline ModelSpec small_spec(const DatasetMeta& meta, Mode mode, RegionGraphKind kind,
                            std::uint64_t seed, int n_c = 3) {
  ModelSpec spec;
  spec.meta = meta;
  spec.mode = mode;
  spec.ordering = mode == Mode::PiPgc ? OrderingKind::Bft : OrderingKind::None;
  spec.rg_node.kind = kind;
  spec.rg_edge.kind = kind;
  spec.rg_node.n_layers = 2;
  spec.rg_edge.n_layers = 2;
  spec.rg_node.n_repetitions = 2;
  spec.rg_edge.n_repetitions = 2;
  spec.rg_node.seed = derive_seed(seed, 1);
  spec.rg_edge.seed = kind == RegionGraphKind::RtSync ? spec.rg_node.seed : derive_seed(seed, 2);
  spec.sum_units = 3;
  spec.input_units = 2;
  spec.coupling_units = n_c;
  spec.seed = seed;
  return spec;
}

inline std::vector<GraphInstance> structure_rows_dataset(const DatasetMeta& meta,
                                                         std::uint64_t seed, int count = 40) {
  // Mixed sizes with correlated labels; used to give hclt something to learn.
  std::vector<GraphInstance> out;
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    const int n = 1 + static_cast<int>(rng.uniform_int(meta.m));
    GraphInstance g;
    g.n = n;
    g.node_labels.resize(n);
    for (int v = 0; v < n; ++v)
      g.node_labels[v] = static_cast<std::int32_t>((i + v) % meta.n_x);
    g.edge_labels.assign(static_cast<std::size_t>(n) * (n - 1) / 2, 0);
    for (int v = 1; v < n; ++v)
      g.edge_labels[tri_index(v, v - 1)] = static_cast<std::int32_t>(1 + (i % (meta.n_a - 1)));
    out.push_back(g);
  }
  return out;
}

}  // namespace pgc::testing
