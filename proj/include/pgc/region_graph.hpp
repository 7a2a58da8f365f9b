#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "pgc/graph.hpp"

namespace pgc {

// A scope-partition tree. Region nodes own zero or one partition child;
// partition children are regions with pairwise-disjoint scopes whose union
// is the parent scope. Leaf regions have singleton scope.
struct RegionNode {
  enum class Kind { Region, Partition };
  Kind kind = Kind::Region;
  std::vector<int> scope;  // sorted variable indices
  std::vector<std::unique_ptr<RegionNode>> children;

  bool is_leaf_region() const { return kind == Kind::Region && children.empty(); }
};

using RegionPtr = std::unique_ptr<RegionNode>;

enum class RegionGraphKind { Bt, Lt, Rt, RtSync, Hclt };

RegionGraphKind parse_region_graph_kind(const std::string& name);
std::string region_graph_kind_name(RegionGraphKind kind);

struct RegionGraphSpec {
  RegionGraphKind kind = RegionGraphKind::Bt;
  int n_layers = 3;        // split-depth budget (bt/lt/rt/rt_s)
  int n_repetitions = 1;   // rt/rt_s only
  std::uint64_t seed = 0;  // rt/rt_s shuffles
  double smoothing = 0.1;  // hclt mutual-information pseudo-count

  void validate() const;
};

// Balanced binary splits (left half takes the ceiling) down to `n_layers`
// levels or singleton scopes; any scope still unsplit at the depth budget
// becomes a fully factorized partition into singletons.
RegionPtr build_bt(std::span<const int> vars, int n_layers);

// Chain splits {v0} | {v1, ...} under the same depth-budget rule.
RegionPtr build_lt(std::span<const int> vars, int n_layers);

// One balanced tree per repetition, each over an independently shuffled
// variable order.
std::vector<RegionPtr> build_rt(std::span<const int> vars, int n_layers,
                                int n_repetitions, std::uint64_t seed);

// Repetition r draws a single node shuffle; the node tree is built over it
// and the edge tree over the induced edge order, where edge (i, j) sorts by
// (shuffle rank of its later endpoint, shuffle rank of its earlier endpoint).
struct SyncedRegionRoots {
  std::vector<RegionPtr> node_roots;
  std::vector<RegionPtr> edge_roots;
};
SyncedRegionRoots build_rt_sync(std::span<const int> node_vars, std::span<const int> edge_vars,
                                int m, int n_layers_node, int n_layers_edge,
                                int n_repetitions, std::uint64_t seed);

// Categorical data rows for structure learning: rows[i][v] is the category
// of variable v in instance i, or kMarginalized when padded out.
using CategoricalRows = std::vector<std::vector<std::int32_t>>;

// Empirical mutual information (nats) of a categorical pair from joint
// counts over instances where both variables are unmasked; `smoothing` is a
// Laplace pseudo-count added to every joint cell. Returns 0 with fewer than
// 2 co-observed instances.
double mutual_information(const CategoricalRows& rows, int a, int b,
                          int categories_a, int categories_b, double smoothing);

// Maximum-weight spanning tree over the pairwise mutual-information matrix
// (Kruskal, ties by lexicographic edge index). Edges returned as (lo, hi)
// variable pairs.
std::vector<std::pair<int, int>> chow_liu_tree(const CategoricalRows& rows,
                                               std::span<const int> vars,
                                               std::span<const int> categories,
                                               double smoothing);

// Latent-tree region structure over the Chow-Liu tree rooted at the
// lowest-index variable. Empty data falls back to build_lt and sets
// *fell_back when provided.
RegionPtr build_hclt(const CategoricalRows& rows, std::span<const int> vars,
                     std::span<const int> categories, double smoothing,
                     bool* fell_back = nullptr);

// Structural validation: kind alternation, disjoint covers, singleton
// leaves. Returns human-readable violations; empty means valid.
std::vector<std::string> validate_region_tree(const RegionNode& root,
                                              std::span<const int> expected_scope);

// Leaf scopes collected left to right.
std::vector<int> leaf_variables(const RegionNode& root);

}  // namespace pgc
