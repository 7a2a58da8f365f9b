#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgc/circuit.hpp"
#include "pgc/graph.hpp"
#include "pgc/ordering.hpp"
#include "pgc/region_graph.hpp"
#include "pgc/rng.hpp"

namespace pgc {

// Invariance strategy of the joint over node count and labels.
//   SPgc     - permutation-sensitive circuit pair, instances scored as given.
//   PiPgc    - instances sorted into a canonical order before scoring.
//   NFactPgc - exact average over all n! orderings (n capped).
//   IPgc     - mixture of shared-parameter factorized components, invariant
//              by construction.
enum class Mode { IPgc, PiPgc, SPgc, NFactPgc };

Mode parse_mode(const std::string& name);
std::string mode_name(Mode mode);

struct ModelSpec {
  DatasetMeta meta;
  RegionGraphSpec rg_node;
  RegionGraphSpec rg_edge;
  int sum_units = 8;       // internal sum layer width
  int input_units = 8;     // input layer width
  int coupling_units = 4;  // width of the product layer joining the two circuits
  Mode mode = Mode::SPgc;
  OrderingKind ordering = OrderingKind::None;  // PiPgc only
  int factorial_cap = 6;   // largest n whose n! orderings NFactPgc enumerates
  std::uint64_t seed = 0;

  void validate() const;
};

// Exact evidence/marginal query over an n-node graph: every node and edge
// variable is either Observed(category) or kMarginalized. Variables of the
// padding region (index >= n and edges touching it) must be marginalized.
struct QuerySpec {
  int n = 0;
  std::vector<std::int32_t> nodes;  // length meta.m
  std::vector<std::int32_t> edges;  // length m(m-1)/2

  void validate(const DatasetMeta& meta) const;
  static QuerySpec all_marginalized(const DatasetMeta& meta, int n);
  // Everything real observed from the instance.
  static QuerySpec observe(const GraphInstance& g, const DatasetMeta& meta);
  static QuerySpec from_json(const nlohmann::json& j, const DatasetMeta& meta);
  nlohmann::json to_json() const;
};

// Node circuit + edge circuit joined by an elementwise product over
// `coupling_units` components and one root sum, times a categorical
// distribution over the node count. The IPgc mode replaces the circuits by
// per-component shared categorical tables.
class PgcModel {
 public:
  static PgcModel create(const ModelSpec& spec,
                         const std::vector<GraphInstance>* structure_data = nullptr);

  const ModelSpec& spec() const { return spec_; }
  const DatasetMeta& meta() const { return spec_.meta; }
  Mode mode() const { return spec_.mode; }

  std::size_t num_params() const;
  void get_params(std::span<double> out) const;
  void set_params(std::span<const double> in);
  void init_params(std::uint64_t seed);

  // log p(G^n | n) for the instance as given (no reordering); for IPgc this
  // is the factorized mixture at fixed n. Shared by queries and oracles.
  double logp_joint_fixed(const GraphInstance& g) const;

  // log p(G), dispatched on the invariance mode.
  double logp(const GraphInstance& g) const;

  // As logp, also accumulating d logp / d params into grad.
  double logp_with_grad(const GraphInstance& g, std::span<double> grad) const;

  // log p(G^n | z, n) of one factorized component (IPgc only).
  double logp_ipgc_component(const GraphInstance& g, int z) const;

  // Single-pass evidence/marginal query; adds log p(n).
  double query(const QuerySpec& q) const;

  std::vector<double> log_cardinality() const;

  GraphInstance sample(Rng& rng) const;

  // Reusable evidence conditioning (n posterior + forward caches).
  struct ConditionalContext {
    GraphInstance evidence;  // canonicalized under PiPgc
    std::vector<double> log_n_posterior;  // over n = 1..m, -inf below evidence size
    Circuit::Evaluation node_eval;
    Circuit::Evaluation edge_eval;
    std::vector<double> component_logits;  // coupling posterior given evidence
  };
  ConditionalContext condition_on(const GraphInstance& evidence) const;
  GraphInstance sample_conditional(const ConditionalContext& ctx, Rng& rng) const;
  GraphInstance sample_conditional(const GraphInstance& evidence, Rng& rng) const;

  // Structural self-checks; empty result means valid.
  std::vector<std::string> check() const;

  // Canonical frame used for scoring under PiPgc; identity otherwise.
  GraphInstance to_eval_frame(const GraphInstance& g) const;

  const Circuit* node_circuit() const { return node_circuit_ ? &*node_circuit_ : nullptr; }
  const Circuit* edge_circuit() const { return edge_circuit_ ? &*edge_circuit_ : nullptr; }
  Circuit* node_circuit() { return node_circuit_ ? &*node_circuit_ : nullptr; }
  Circuit* edge_circuit() { return edge_circuit_ ? &*edge_circuit_ : nullptr; }
  std::span<const double> coupling_logits() const { return coupling_; }
  std::span<const double> cardinality_logits() const { return cardinality_; }
  std::span<const double> node_table_logits() const { return theta_node_; }
  std::span<const double> edge_table_logits() const { return theta_edge_; }

  // Serialization hooks (see train.hpp for the file format).
  nlohmann::json structure_to_json() const;
  static PgcModel from_structure_json(const nlohmann::json& j);

 private:
  PgcModel() = default;

  ModelSpec spec_;
  std::optional<Circuit> node_circuit_;
  std::optional<Circuit> edge_circuit_;  // absent when m == 1
  std::vector<double> coupling_;         // n_c logits
  std::vector<double> cardinality_;      // m logits for p(N)
  // IPgc tables: one categorical per component for nodes and for edges.
  std::vector<double> theta_node_;  // n_c * n_x
  std::vector<double> theta_edge_;  // n_c * n_a

  struct JointEval;
  double circuit_joint(std::span<const std::int32_t> node_vals,
                       std::span<const std::int32_t> edge_vals, JointEval* eval) const;
  double ipgc_joint(std::span<const std::int32_t> node_vals,
                    std::span<const std::int32_t> edge_vals,
                    std::vector<double>* responsibilities) const;
  double joint_logp(std::span<const std::int32_t> node_vals,
                    std::span<const std::int32_t> edge_vals) const;
  double joint_logp_with_grad(const GraphInstance& g, std::span<double> grad) const;
  double log_cardinality_at(int n) const;
  std::uint64_t ordering_seed_for(const GraphInstance& g) const;
};

}  // namespace pgc
