#include "pgc/ordering.hpp"

#include <algorithm>
#include <deque>
#include <vector>

#include "pgc/rng.hpp"

namespace pgc {

namespace {

std::vector<std::vector<int>> adjacency(const GraphInstance& g) {
  std::vector<std::vector<int>> adj(g.n);
  for (int i = 1; i < g.n; ++i)
    for (int j = 0; j < i; ++j)
      if (g.edge_labels[tri_index(i, j)] != 0) {
        adj[i].push_back(j);
        adj[j].push_back(i);
      }
  for (auto& nb : adj) std::sort(nb.begin(), nb.end());
  return adj;
}

int start_node(const std::vector<std::vector<int>>& adj) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(adj.size()); ++i)
    if (adj[i].size() < adj[best].size()) best = i;
  return best;
}

int lowest_unvisited(const std::vector<bool>& visited) {
  for (int i = 0; i < static_cast<int>(visited.size()); ++i)
    if (!visited[i]) return i;
  return -1;
}

}  // namespace

OrderingKind parse_ordering(const std::string& name) {
  if (name == "none") return OrderingKind::None;
  if (name == "random") return OrderingKind::Random;
  if (name == "bft") return OrderingKind::Bft;
  if (name == "dft") return OrderingKind::Dft;
  if (name == "rcm") return OrderingKind::Rcm;
  if (name == "mca")
    throw DataError("ordering 'mca' needs an external chemistry canonicalization toolkit "
                    "and is not supported; choose one of: random, bft, dft, rcm");
  throw DataError("unknown ordering '" + name + "'; expected one of: random, bft, dft, rcm");
}

std::string ordering_name(OrderingKind kind) {
  switch (kind) {
    case OrderingKind::None: return "none";
    case OrderingKind::Random: return "random";
    case OrderingKind::Bft: return "bft";
    case OrderingKind::Dft: return "dft";
    case OrderingKind::Rcm: return "rcm";
  }
  return "?";
}

Permutation order_bft(const GraphInstance& g) {
  const auto adj = adjacency(g);
  Permutation order;
  order.map.reserve(g.n);
  std::vector<bool> visited(g.n, false);
  int start = start_node(adj);
  while (start >= 0) {
    std::deque<int> queue{start};
    visited[start] = true;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      order.map.push_back(u);
      for (int v : adj[u])
        if (!visited[v]) {
          visited[v] = true;
          queue.push_back(v);
        }
    }
    start = lowest_unvisited(visited);
  }
  return order;
}

Permutation order_dft(const GraphInstance& g) {
  const auto adj = adjacency(g);
  Permutation order;
  order.map.reserve(g.n);
  std::vector<bool> visited(g.n, false);
  int start = start_node(adj);
  while (start >= 0) {
    std::vector<int> stack{start};
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      if (visited[u]) continue;
      visited[u] = true;
      order.map.push_back(u);
      // Reverse push so the lowest-index neighbor is expanded first.
      for (auto it = adj[u].rbegin(); it != adj[u].rend(); ++it)
        if (!visited[*it]) stack.push_back(*it);
    }
    start = lowest_unvisited(visited);
  }
  return order;
}

Permutation order_rcm(const GraphInstance& g) {
  const auto adj = adjacency(g);
  Permutation order;
  order.map.reserve(g.n);
  std::vector<bool> visited(g.n, false);
  int start = start_node(adj);
  while (start >= 0) {
    std::deque<int> queue{start};
    visited[start] = true;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      order.map.push_back(u);
      std::vector<int> next;
      for (int v : adj[u])
        if (!visited[v]) {
          visited[v] = true;
          next.push_back(v);
        }
      std::sort(next.begin(), next.end(), [&adj](int a, int b) {
        if (adj[a].size() != adj[b].size()) return adj[a].size() < adj[b].size();
        return a < b;
      });
      for (int v : next) queue.push_back(v);
    }
    start = lowest_unvisited(visited);
  }
  std::reverse(order.map.begin(), order.map.end());
  return order;
}

Permutation order_random(const GraphInstance& g, std::uint64_t seed) {
  Permutation order = Permutation::identity(g.n);
  Rng rng(seed);
  rng.shuffle(std::span<std::int32_t>(order.map));
  return order;
}

Permutation order_nodes(const GraphInstance& g, OrderingKind kind, std::uint64_t seed) {
  switch (kind) {
    case OrderingKind::Random: return order_random(g, seed);
    case OrderingKind::Bft: return order_bft(g);
    case OrderingKind::Dft: return order_dft(g);
    case OrderingKind::Rcm: return order_rcm(g);
    case OrderingKind::None: break;
  }
  throw DataError("order_nodes: ordering kind 'none' cannot produce an order");
}

GraphInstance canonicalize(const GraphInstance& g, OrderingKind kind, std::uint64_t seed) {
  return permute(g, order_nodes(g, kind, seed));
}

int bandwidth(const GraphInstance& g) {
  int bw = 0;
  for (int i = 1; i < g.n; ++i)
    for (int j = 0; j < i; ++j)
      if (g.edge_labels[tri_index(i, j)] != 0) bw = std::max(bw, i - j);
  return bw;
}

}  // namespace pgc
