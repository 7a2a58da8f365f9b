#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pgc/graph.hpp"
#include "pgc/model.hpp"
#include "pgc/ordering.hpp"

namespace pgc {

// Valence budget per node category and bond order per edge category.
// Edge category 0 (no edge) must carry order 0.
struct ValencyTable {
  std::vector<int> max_valence;  // length n_x
  std::vector<int> bond_orders;  // length n_a

  void validate(const DatasetMeta& meta) const;
  // C=4, N=3, O=2, F=1 with bond orders 0,1,2,3.
  static ValencyTable qm9_default();
  static ValencyTable load(const std::string& path, const DatasetMeta& meta);
};

// True iff every node's incident bond orders fit its valence budget and the
// graph is a single connected component.
bool is_valid(const GraphInstance& g, const ValencyTable& vt);

// Canonical byte string: minimum over all start nodes of the serialized
// breadth-first form (labels in visit order, then reordered edge labels).
// Traversal ties are broken by label-aware invariant keys, so isomorphic
// inputs without automorphism-induced ties map to equal certificates.
std::string certificate(const GraphInstance& g);

// Chained generation metrics, each in percent: valid over all samples,
// unique over valid, novel over valid-and-unique.
struct MetricsReport {
  double valid_pct = 0.0;
  double unique_pct = 0.0;
  double novel_pct = 0.0;
  std::size_t sample_count = 0;
};

MetricsReport metrics_suite(std::span<const GraphInstance> samples,
                            std::span<const GraphInstance> train_set, const ValencyTable& vt);

// Rank-based (Mann-Whitney) AUC with ties counted one half.
double auc(std::span<const double> scores_pos, std::span<const double> scores_neg);

struct AnomalyResult {
  double auc = 0.0;
  std::vector<double> bin_edges;       // histogram over the pooled score range
  std::vector<std::size_t> count_in;
  std::vector<std::size_t> count_out;
  std::vector<double> scores_in;
  std::vector<double> scores_out;
};

// Scores both sets by model log-likelihood after uniformly re-permuting
// floor(permute_frac * |in_set|) in-distribution instances (seeded).
AnomalyResult anomaly_experiment(const PgcModel& model, std::span<const GraphInstance> in_set,
                                 std::span<const GraphInstance> out_set, double permute_frac,
                                 std::uint64_t seed, int bins = 40);

// Mean symmetric edge-presence indicator per node-slot pair after applying
// the ordering to every instance; m x m, row-major.
std::vector<double> adjacency_heatmap(std::span<const GraphInstance> data,
                                      const DatasetMeta& meta, OrderingKind kind,
                                      std::uint64_t seed = 0);

// Mean |i - j| of the heatmap mass; smaller means tighter to the diagonal.
double bandwidth_weighted_mean(std::span<const double> heatmap, int m);

void write_heatmap_csv(const std::string& path, std::span<const double> heatmap, int m);

}  // namespace pgc
