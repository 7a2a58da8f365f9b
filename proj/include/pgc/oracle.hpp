#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pgc/graph.hpp"
#include "pgc/model.hpp"

namespace pgc {

// Total number of labeled graphs with 1 <= n <= m under the meta.
double enumeration_size(const DatasetMeta& meta);

// Visits every labeled graph exactly once (n ascending, then node labels,
// then edge labels, both in odometer order). Throws when the space exceeds
// the cap, so the oracle cannot run at dataset scale by accident.
void for_each_graph(const DatasetMeta& meta, std::uint64_t cap,
                    const std::function<void(const GraphInstance&)>& visit);

std::vector<GraphInstance> enumerate_graphs(const DatasetMeta& meta, std::uint64_t cap = 1000000);

// Sum of exp(logp) over the enumeration. Under PiPgc only graphs that are
// fixed points of their own canonicalization contribute (the model places
// mass on canonical forms), so the result is a lower bound <= 1; the other
// modes must come out at 1.
double total_mass(const PgcModel& model, std::uint64_t cap = 1000000);

// Query answered by explicit summation over every completion of the
// marginalized real variables, against the same fixed-order joint the
// single-pass query uses.
double oracle_query(const PgcModel& model, const QuerySpec& q);

// log[(1/n!) sum over all orderings of exp(fixed-order joint)].
double oracle_perm_average(const PgcModel& model, const GraphInstance& g);

}  // namespace pgc
