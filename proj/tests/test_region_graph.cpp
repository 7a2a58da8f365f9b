#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "pgc/region_graph.hpp"
#include "support.hpp"

using namespace pgc;
using namespace pgc::testing;

namespace {

std::vector<int> iota_vars(int k) {
  std::vector<int> vars(k);
  std::iota(vars.begin(), vars.end(), 0);
  return vars;
}

// Scopes of the two parts of the root partition, sorted for comparison.
std::vector<std::vector<int>> root_partition_scopes(const RegionNode& root) {
  REQUIRE(root.children.size() == 1);
  std::vector<std::vector<int>> out;
  for (const auto& part : root.children[0]->children) out.push_back(part->scope);
  return out;
}

// All spanning trees of the complete graph on k vertices, as edge lists.
void all_spanning_trees(int k, std::vector<std::vector<std::pair<int, int>>>& out) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) edges.emplace_back(i, j);
  std::vector<int> pick(k - 1, 0);
  // choose k-1 edges by index combinations
  std::vector<int> comb(k - 1);
  std::iota(comb.begin(), comb.end(), 0);
  auto connected = [&](const std::vector<int>& chosen) {
    std::vector<int> parent(k);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    int merges = 0;
    for (int e : chosen) {
      const auto [a, b] = edges[e];
      const int ra = find(a), rb = find(b);
      if (ra == rb) return false;  // cycle, not a tree
      parent[ra] = rb;
      ++merges;
    }
    return merges == k - 1;
  };
  while (true) {
    if (connected(comb)) {
      std::vector<std::pair<int, int>> tree;
      for (int e : comb) tree.push_back(edges[e]);
      out.push_back(tree);
    }
    int i = k - 2;
    while (i >= 0 && comb[i] == static_cast<int>(edges.size()) - (k - 1) + i) --i;
    if (i < 0) break;
    ++comb[i];
    for (int j = i + 1; j < k - 1; ++j) comb[j] = comb[j - 1] + 1;
  }
}

}  // namespace

TEST_CASE("bt splits take the ceiling on the left") {
  const auto single = build_bt(iota_vars(1), 3);
  CHECK(single->is_leaf_region());

  const auto four = build_bt(iota_vars(4), 3);
  CHECK(root_partition_scopes(*four) ==
        std::vector<std::vector<int>>{{0, 1}, {2, 3}});
  CHECK(validate_region_tree(*four, iota_vars(4)).empty());

  const auto three = build_bt(iota_vars(3), 3);
  CHECK(root_partition_scopes(*three) == std::vector<std::vector<int>>{{0, 1}, {2}});
}

TEST_CASE("bt depth budget fully factorizes the remainder") {
  const auto root = build_bt(iota_vars(4), 1);
  // one split, then both halves stop as singleton pairs
  const auto parts = root_partition_scopes(*root);
  REQUIRE(parts.size() == 2);
  for (const auto& part : root.get()->children[0]->children) {
    if (part->scope.size() > 1) {
      REQUIRE(part->children.size() == 1);
      for (const auto& leaf : part->children[0]->children) CHECK(leaf->scope.size() == 1);
    }
  }
  CHECK(validate_region_tree(*root, iota_vars(4)).empty());
}

TEST_CASE("lt is a chain of head splits") {
  CHECK(build_lt(iota_vars(1), 2)->is_leaf_region());

  const auto three = build_lt(iota_vars(3), 5);
  const auto parts = root_partition_scopes(*three);
  CHECK(parts == std::vector<std::vector<int>>{{0}, {1, 2}});
  const auto& tail = three->children[0]->children[1];
  CHECK(root_partition_scopes(*tail) == std::vector<std::vector<int>>{{1}, {2}});
}

TEST_CASE("lt depth budget 1 on 4 variables factorizes the tail") {
  const auto root = build_lt(iota_vars(4), 1);
  const auto parts = root_partition_scopes(*root);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0] == std::vector<int>{0});
  CHECK(parts[1] == std::vector<int>{1, 2, 3});
  const auto& tail = root->children[0]->children[1];
  REQUIRE(tail->children.size() == 1);
  CHECK(tail->children[0]->children.size() == 3);  // fully factorized
  for (const auto& leaf : tail->children[0]->children) CHECK(leaf->is_leaf_region());
}

TEST_CASE("rt produces one valid tree per repetition, reproducibly") {
  const auto roots = build_rt(iota_vars(6), 3, 3, 99);
  CHECK(roots.size() == 3);
  for (const auto& r : roots) {
    CHECK(validate_region_tree(*r, iota_vars(6)).empty());
    auto leaves = leaf_variables(*r);
    std::sort(leaves.begin(), leaves.end());
    CHECK(leaves == iota_vars(6));
  }

  const auto single = build_rt(iota_vars(6), 3, 1, 42);
  const auto again = build_rt(iota_vars(6), 3, 1, 42);
  CHECK(leaf_variables(*single[0]) == leaf_variables(*again[0]));

  // different seeds shuffle differently on 8 variables (probability 1 - 1/8!)
  const auto a = build_rt(iota_vars(8), 4, 1, 1);
  const auto b = build_rt(iota_vars(8), 4, 1, 2);
  CHECK(leaf_variables(*a[0]) != leaf_variables(*b[0]));
}

TEST_CASE("rt_sync identity shuffle keeps the ascending edge order") {
  // Repetition 0 of seed s shuffles; find the identity case by checking the
  // induced edge order directly against the stated key on a forced shuffle.
  const int m = 3;
  const auto sync = build_rt_sync(iota_vars(m), iota_vars(3), m, 2, 2, 1, 77);
  REQUIRE(sync.node_roots.size() == 1);
  REQUIRE(sync.edge_roots.size() == 1);

  const auto node_order = leaf_variables(*sync.node_roots[0]);
  std::vector<int> rank(m);
  for (int pos = 0; pos < m; ++pos) rank[node_order[pos]] = pos;

  // expected edge order: sort tri pairs by (max rank, min rank)
  struct EdgeKey {
    int hi, lo, e;
  };
  std::vector<EdgeKey> keys;
  for (int i = 1; i < m; ++i)
    for (int j = 0; j < i; ++j)
      keys.push_back({std::max(rank[i], rank[j]), std::min(rank[i], rank[j]), tri_index(i, j)});
  std::sort(keys.begin(), keys.end(), [](const EdgeKey& a, const EdgeKey& b) {
    return std::pair(a.hi, a.lo) < std::pair(b.hi, b.lo);
  });
  std::vector<int> expected;
  for (const auto& k : keys) expected.push_back(k.e);
  CHECK(leaf_variables(*sync.edge_roots[0]) == expected);
}

TEST_CASE("rt_sync reversal example: m=3 reverses the edge order") {
  // With ranks (2,1,0) the keys send (1,0),(2,0),(2,1) to (2,1),(2,0),(1,0):
  // the sorted edge order is the reverse of the ascending one.
  std::vector<int> rank = {2, 1, 0};
  std::vector<std::pair<std::pair<int, int>, int>> keyed;
  for (int i = 1; i < 3; ++i)
    for (int j = 0; j < i; ++j)
      keyed.push_back({{std::max(rank[i], rank[j]), std::min(rank[i], rank[j])}, tri_index(i, j)});
  std::sort(keyed.begin(), keyed.end());
  std::vector<int> order;
  for (const auto& [key, e] : keyed) order.push_back(e);
  CHECK(order == std::vector<int>{tri_index(2, 1), tri_index(2, 0), tri_index(1, 0)});
}

TEST_CASE("rt_sync emits matched repetition counts and validates sizes") {
  const auto sync = build_rt_sync(iota_vars(4), iota_vars(6), 4, 2, 3, 3, 5);
  CHECK(sync.node_roots.size() == 3);
  CHECK(sync.edge_roots.size() == 3);
  CHECK_THROWS_AS(build_rt_sync(iota_vars(4), iota_vars(5), 4, 2, 3, 1, 5), DataError);
}

TEST_CASE("mutual information of a perfectly correlated binary pair is ln 2") {
  CategoricalRows rows = {{0, 0}, {0, 0}, {1, 1}, {1, 1}};
  CHECK(mutual_information(rows, 0, 1, 2, 2, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("mutual information edge cases") {
  CategoricalRows constant = {{0, 1}, {0, 1}, {0, 1}};
  CHECK(mutual_information(constant, 0, 1, 2, 2, 0.0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(mutual_information(constant, 1, 1, 2, 2, 0.0), DataError);

  CategoricalRows single = {{0, 0}};
  CHECK(mutual_information(single, 0, 1, 2, 2, 0.0) == 0.0);
  CategoricalRows masked = {{0, kMarginalized}, {1, kMarginalized}, {0, 0}};
  CHECK(mutual_information(masked, 0, 1, 2, 2, 0.1) == 0.0);  // one co-observed row
}

TEST_CASE("hclt recovers a chain from pairwise couplings") {
  // Markov chain with symmetric flip noise: adjacent pairs carry more
  // information than the endpoints, so Kruskal picks the chain 0-1-2.
  CategoricalRows rows;
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const auto a = static_cast<std::int32_t>(rng.uniform_int(2));
    const std::int32_t b = rng.uniform01() < 0.85 ? a : 1 - a;
    const std::int32_t c = rng.uniform01() < 0.85 ? b : 1 - b;
    rows.push_back({a, b, c});
  }
  const std::vector<int> cats = {2, 2, 2};
  const auto edges = chow_liu_tree(rows, iota_vars(3), cats, 0.0);
  const std::set<std::pair<int, int>> tree(edges.begin(), edges.end());
  CHECK(tree == std::set<std::pair<int, int>>{{0, 1}, {1, 2}});
}

TEST_CASE("hclt on constant data is a lexicographic star") {
  CategoricalRows rows(5, std::vector<std::int32_t>{0, 0, 0, 0});
  const std::vector<int> cats = {2, 2, 2, 2};
  const auto edges = chow_liu_tree(rows, iota_vars(4), cats, 0.1);
  const std::set<std::pair<int, int>> tree(edges.begin(), edges.end());
  CHECK(tree == std::set<std::pair<int, int>>{{0, 1}, {0, 2}, {0, 3}});
}

TEST_CASE("hclt spanning tree weight matches brute force for <= 6 variables") {
  for (int k = 3; k <= 6; ++k) {
    CategoricalRows rows;
    Rng rng(100 + k);
    for (int i = 0; i < 200; ++i) {
      std::vector<std::int32_t> row(k);
      row[0] = static_cast<std::int32_t>(rng.uniform_int(3));
      for (int v = 1; v < k; ++v)
        row[v] = rng.uniform01() < 0.6 ? row[v - 1] : static_cast<std::int32_t>(rng.uniform_int(3));
      rows.push_back(row);
    }
    const std::vector<int> cats(k, 3);
    std::vector<std::vector<double>> mi(k, std::vector<double>(k, 0.0));
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j)
        mi[i][j] = mi[j][i] = mutual_information(rows, i, j, 3, 3, 0.1);

    const auto edges = chow_liu_tree(rows, iota_vars(k), cats, 0.1);
    double weight = 0.0;
    for (auto [a, b] : edges) weight += mi[a][b];

    std::vector<std::vector<std::pair<int, int>>> trees;
    all_spanning_trees(k, trees);
    double best = -1.0;
    for (const auto& tree : trees) {
      double w = 0.0;
      for (auto [a, b] : tree) w += mi[a][b];
      best = std::max(best, w);
    }
    CHECK(weight == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("hclt region tree: two variables form the unique one-edge tree") {
  CategoricalRows rows = {{0, 1}, {1, 0}};
  const std::vector<int> cats = {2, 2};
  const auto root = build_hclt(rows, iota_vars(2), cats, 0.1);
  CHECK(validate_region_tree(*root, iota_vars(2)).empty());
  auto leaves = leaf_variables(*root);
  std::sort(leaves.begin(), leaves.end());
  CHECK(leaves == iota_vars(2));
}

TEST_CASE("hclt falls back to lt on empty data") {
  CategoricalRows rows;
  const std::vector<int> cats = {2, 2, 2};
  bool fell_back = false;
  const auto root = build_hclt(rows, iota_vars(3), cats, 0.1, &fell_back);
  CHECK(fell_back);
  CHECK(validate_region_tree(*root, iota_vars(3)).empty());
}

TEST_CASE("every builder satisfies the disjoint-cover invariant and exact leaf partition") {
  const auto vars = iota_vars(7);
  std::vector<RegionPtr> all;
  all.push_back(build_bt(vars, 3));
  all.push_back(build_lt(vars, 3));
  for (auto& r : build_rt(vars, 2, 3, 8)) all.push_back(std::move(r));
  CategoricalRows rows;
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    std::vector<std::int32_t> row(7);
    for (auto& v : row) v = static_cast<std::int32_t>(rng.uniform_int(2));
    rows.push_back(row);
  }
  const std::vector<int> cats(7, 2);
  all.push_back(build_hclt(rows, vars, cats, 0.1));

  for (const auto& root : all) {
    CHECK(validate_region_tree(*root, vars).empty());
    auto leaves = leaf_variables(*root);
    std::sort(leaves.begin(), leaves.end());
    CHECK(leaves == vars);
  }
}

TEST_CASE("region graph spec validation") {
  RegionGraphSpec spec;
  spec.kind = RegionGraphKind::Rt;
  spec.n_repetitions = 0;
  CHECK_THROWS_AS(spec.validate(), DataError);
  CHECK_THROWS_AS(parse_region_graph_kind("vtree"), DataError);
  CHECK(parse_region_graph_kind("rt_s") == RegionGraphKind::RtSync);
}
