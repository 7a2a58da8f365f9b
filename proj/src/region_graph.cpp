#include "pgc/region_graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "pgc/rng.hpp"

namespace pgc {

namespace {

RegionPtr make_region(std::vector<int> scope) {
  auto node = std::make_unique<RegionNode>();
  node->kind = RegionNode::Kind::Region;
  node->scope = std::move(scope);
  std::sort(node->scope.begin(), node->scope.end());
  return node;
}

RegionPtr make_partition(std::vector<RegionPtr> parts) {
  auto node = std::make_unique<RegionNode>();
  node->kind = RegionNode::Kind::Partition;
  for (auto& p : parts) {
    node->scope.insert(node->scope.end(), p->scope.begin(), p->scope.end());
    node->children.push_back(std::move(p));
  }
  std::sort(node->scope.begin(), node->scope.end());
  return node;
}

RegionPtr region_over(std::vector<RegionPtr> parts) {
  auto partition = make_partition(std::move(parts));
  auto region = make_region(partition->scope);
  region->children.push_back(std::move(partition));
  return region;
}

RegionPtr fully_factorized(std::span<const int> seq) {
  if (seq.size() == 1) return make_region({seq[0]});
  std::vector<RegionPtr> parts;
  parts.reserve(seq.size());
  for (int v : seq) parts.push_back(make_region({v}));
  return region_over(std::move(parts));
}

// Balanced halving over the given sequence order, depth-budgeted.
RegionPtr build_balanced(std::span<const int> seq, int depth_left) {
  if (seq.size() == 1) return make_region({seq[0]});
  if (depth_left <= 0) return fully_factorized(seq);
  const std::size_t left = (seq.size() + 1) / 2;
  std::vector<RegionPtr> parts;
  parts.push_back(build_balanced(seq.subspan(0, left), depth_left - 1));
  parts.push_back(build_balanced(seq.subspan(left), depth_left - 1));
  return region_over(std::move(parts));
}

RegionPtr build_chain(std::span<const int> seq, int depth_left) {
  if (seq.size() == 1) return make_region({seq[0]});
  if (depth_left <= 0) return fully_factorized(seq);
  std::vector<RegionPtr> parts;
  parts.push_back(make_region({seq[0]}));
  parts.push_back(build_chain(seq.subspan(1), depth_left - 1));
  return region_over(std::move(parts));
}

}  // namespace

RegionGraphKind parse_region_graph_kind(const std::string& name) {
  if (name == "bt") return RegionGraphKind::Bt;
  if (name == "lt") return RegionGraphKind::Lt;
  if (name == "rt") return RegionGraphKind::Rt;
  if (name == "rt_s") return RegionGraphKind::RtSync;
  if (name == "hclt") return RegionGraphKind::Hclt;
  throw DataError("unknown region graph kind '" + name + "'; expected bt|lt|rt|rt_s|hclt");
}

std::string region_graph_kind_name(RegionGraphKind kind) {
  switch (kind) {
    case RegionGraphKind::Bt: return "bt";
    case RegionGraphKind::Lt: return "lt";
    case RegionGraphKind::Rt: return "rt";
    case RegionGraphKind::RtSync: return "rt_s";
    case RegionGraphKind::Hclt: return "hclt";
  }
  return "?";
}

void RegionGraphSpec::validate() const {
  if (n_layers < 1) throw DataError("region graph: n_layers must be >= 1");
  if ((kind == RegionGraphKind::Rt || kind == RegionGraphKind::RtSync) && n_repetitions < 1)
    throw DataError("region graph: n_repetitions must be >= 1");
  if (kind == RegionGraphKind::Hclt && smoothing < 0)
    throw DataError("region graph: smoothing must be >= 0");
}

RegionPtr build_bt(std::span<const int> vars, int n_layers) {
  if (vars.empty()) throw DataError("build_bt: empty variable list");
  return build_balanced(vars, n_layers);
}

RegionPtr build_lt(std::span<const int> vars, int n_layers) {
  if (vars.empty()) throw DataError("build_lt: empty variable list");
  return build_chain(vars, n_layers);
}

std::vector<RegionPtr> build_rt(std::span<const int> vars, int n_layers,
                                int n_repetitions, std::uint64_t seed) {
  if (vars.empty()) throw DataError("build_rt: empty variable list");
  std::vector<RegionPtr> roots;
  roots.reserve(n_repetitions);
  std::vector<int> seq(vars.begin(), vars.end());
  for (int r = 0; r < n_repetitions; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    rng.shuffle(std::span<int>(seq));
    roots.push_back(build_balanced(seq, n_layers));
  }
  return roots;
}

SyncedRegionRoots build_rt_sync(std::span<const int> node_vars, std::span<const int> edge_vars,
                                int m, int n_layers_node, int n_layers_edge,
                                int n_repetitions, std::uint64_t seed) {
  if (static_cast<int>(node_vars.size()) != m)
    throw DataError("build_rt_sync: node variable count does not match m");
  if (static_cast<int>(edge_vars.size()) != m * (m - 1) / 2)
    throw DataError("build_rt_sync: edge variable count does not match m(m-1)/2");

  SyncedRegionRoots out;
  const bool has_edges = !edge_vars.empty();
  std::vector<int> node_seq(node_vars.begin(), node_vars.end());
  for (int r = 0; r < n_repetitions; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    rng.shuffle(std::span<int>(node_seq));
    // rank[u] = position of node slot u in this repetition's shuffle
    std::vector<int> rank(m);
    for (int pos = 0; pos < m; ++pos) rank[node_seq[pos]] = pos;

    std::vector<int> edge_seq(edge_vars.begin(), edge_vars.end());
    std::sort(edge_seq.begin(), edge_seq.end(), [&](int ea, int eb) {
      auto key = [&](int e) {
        // invert tri_index: e = i(i-1)/2 + j
        int i = 1;
        while ((i + 1) * i / 2 <= e) ++i;
        const int j = e - i * (i - 1) / 2;
        const int hi = std::max(rank[i], rank[j]);
        const int lo = std::min(rank[i], rank[j]);
        return std::pair<int, int>(hi, lo);
      };
      return key(ea) < key(eb);
    });

    out.node_roots.push_back(build_balanced(node_seq, n_layers_node));
    if (has_edges) out.edge_roots.push_back(build_balanced(edge_seq, n_layers_edge));
  }
  return out;
}

double mutual_information(const CategoricalRows& rows, int a, int b,
                          int categories_a, int categories_b, double smoothing) {
  if (a == b) throw DataError("mutual_information: variables must differ");
  if (smoothing < 0) throw DataError("mutual_information: smoothing must be >= 0");
  std::vector<double> joint(static_cast<std::size_t>(categories_a) * categories_b, 0.0);
  long co_observed = 0;
  for (const auto& row : rows) {
    const auto va = row[a], vb = row[b];
    if (va == kMarginalized || vb == kMarginalized) continue;
    joint[static_cast<std::size_t>(va) * categories_b + vb] += 1.0;
    ++co_observed;
  }
  if (co_observed < 2) return 0.0;
  double total = 0.0;
  for (auto& cell : joint) {
    cell += smoothing;
    total += cell;
  }
  if (total <= 0.0) return 0.0;
  std::vector<double> pa(categories_a, 0.0), pb(categories_b, 0.0);
  for (int i = 0; i < categories_a; ++i)
    for (int j = 0; j < categories_b; ++j) {
      const double p = joint[static_cast<std::size_t>(i) * categories_b + j] / total;
      pa[i] += p;
      pb[j] += p;
    }
  double mi = 0.0;
  for (int i = 0; i < categories_a; ++i)
    for (int j = 0; j < categories_b; ++j) {
      const double p = joint[static_cast<std::size_t>(i) * categories_b + j] / total;
      if (p > 0.0 && pa[i] > 0.0 && pb[j] > 0.0) mi += p * std::log(p / (pa[i] * pb[j]));
    }
  return std::max(mi, 0.0);
}

std::vector<std::pair<int, int>> chow_liu_tree(const CategoricalRows& rows,
                                               std::span<const int> vars,
                                               std::span<const int> categories,
                                               double smoothing) {
  const int k = static_cast<int>(vars.size());
  struct Candidate {
    double mi;
    int a, b;  // positions within vars
  };
  std::vector<Candidate> cands;
  cands.reserve(static_cast<std::size_t>(k) * (k - 1) / 2);
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      cands.push_back({mutual_information(rows, vars[i], vars[j],
                                          categories[vars[i]], categories[vars[j]], smoothing),
                       i, j});
  std::sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
    if (x.mi != y.mi) return x.mi > y.mi;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });

  std::vector<int> parent(k);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<std::pair<int, int>> edges;
  for (const auto& c : cands) {
    const int ra = find(c.a), rb = find(c.b);
    if (ra == rb) continue;
    parent[ra] = rb;
    edges.emplace_back(vars[c.a], vars[c.b]);
    if (static_cast<int>(edges.size()) == k - 1) break;
  }
  return edges;
}

namespace {

RegionPtr hclt_subtree(int v, int parent, const std::vector<std::vector<int>>& adj) {
  std::vector<RegionPtr> parts;
  parts.push_back(make_region({v}));
  for (int c : adj[v])
    if (c != parent) parts.push_back(hclt_subtree(c, v, adj));
  if (parts.size() == 1) return std::move(parts.front());  // tree leaf
  return region_over(std::move(parts));
}

}  // namespace

RegionPtr build_hclt(const CategoricalRows& rows, std::span<const int> vars,
                     std::span<const int> categories, double smoothing, bool* fell_back) {
  if (vars.empty()) throw DataError("build_hclt: empty variable list");
  if (fell_back) *fell_back = false;
  if (rows.empty()) {
    if (fell_back) *fell_back = true;
    return build_lt(vars, static_cast<int>(vars.size()));
  }
  if (vars.size() == 1) return make_region({vars[0]});

  const auto edges = chow_liu_tree(rows, vars, categories, smoothing);
  const int max_var = *std::max_element(vars.begin(), vars.end());
  std::vector<std::vector<int>> adj(max_var + 1);
  for (auto [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (auto& nb : adj) std::sort(nb.begin(), nb.end());
  const int root_var = *std::min_element(vars.begin(), vars.end());
  return hclt_subtree(root_var, -1, adj);
}

namespace {

void walk_region(const RegionNode& node, bool expect_region, std::vector<std::string>& out) {
  const bool is_region = node.kind == RegionNode::Kind::Region;
  if (is_region != expect_region)
    out.push_back("region/partition alternation violated");
  if (node.scope.empty()) out.push_back("node with empty scope");
  if (!std::is_sorted(node.scope.begin(), node.scope.end()))
    out.push_back("scope not sorted");
  if (is_region) {
    if (node.children.empty()) {
      if (node.scope.size() != 1) out.push_back("leaf region scope is not a singleton");
      return;
    }
    if (node.children.size() != 1) out.push_back("region must own exactly one partition");
    for (const auto& c : node.children) {
      if (c->scope != node.scope) out.push_back("partition scope differs from region scope");
      walk_region(*c, false, out);
    }
    return;
  }
  // partition: children are regions with disjoint scopes covering the parent
  if (node.children.size() < 2) out.push_back("partition with fewer than 2 parts");
  std::vector<int> merged;
  for (const auto& c : node.children) {
    merged.insert(merged.end(), c->scope.begin(), c->scope.end());
    walk_region(*c, true, out);
  }
  std::sort(merged.begin(), merged.end());
  if (std::adjacent_find(merged.begin(), merged.end()) != merged.end())
    out.push_back("partition parts overlap");
  if (merged != node.scope) out.push_back("partition parts do not cover the scope");
}

}  // namespace

std::vector<std::string> validate_region_tree(const RegionNode& root,
                                              std::span<const int> expected_scope) {
  std::vector<std::string> out;
  std::vector<int> expect(expected_scope.begin(), expected_scope.end());
  std::sort(expect.begin(), expect.end());
  if (root.scope != expect) out.push_back("root scope does not match the variable set");
  walk_region(root, true, out);
  return out;
}

std::vector<int> leaf_variables(const RegionNode& root) {
  std::vector<int> out;
  if (root.is_leaf_region()) {
    out.push_back(root.scope[0]);
    return out;
  }
  for (const auto& c : root.children) {
    auto sub = leaf_variables(*c);
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

}  // namespace pgc
