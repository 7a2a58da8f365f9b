#pragma once

#include <cstdint>
#include <string>

#include "pgc/graph.hpp"

namespace pgc {

enum class OrderingKind { None, Random, Bft, Dft, Rcm };

OrderingKind parse_ordering(const std::string& name);
std::string ordering_name(OrderingKind kind);

// Deterministic structural traversal orders. The first component starts at
// the lowest-index node of minimum degree; unvisited companions are taken in
// ascending index order; later components restart at the lowest-index
// unvisited node. Node and edge labels never influence the order.
Permutation order_bft(const GraphInstance& g);
Permutation order_dft(const GraphInstance& g);

// Cuthill-McKee (neighbors queued by ascending degree, ties by index) with
// the final order reversed.
Permutation order_rcm(const GraphInstance& g);

// Uniform over all n! orders (Fisher-Yates).
Permutation order_random(const GraphInstance& g, std::uint64_t seed);

Permutation order_nodes(const GraphInstance& g, OrderingKind kind, std::uint64_t seed = 0);

// permute(g, order_nodes(g, kind)).
GraphInstance canonicalize(const GraphInstance& g, OrderingKind kind, std::uint64_t seed = 0);

// Largest |i - j| over present edges; 0 for edgeless graphs.
int bandwidth(const GraphInstance& g);

}  // namespace pgc
