#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgc/region_graph.hpp"
#include "pgc/rng.hpp"

namespace pgc {

enum class LayerKind { Input, Sum, Product };
enum class ProductKind { Hadamard, Kronecker };

// One tensorized layer. Input and sum layers own a (rows x cols) block of
// unconstrained parameters inside the circuit's flat parameter vector; rows
// are mapped to normalized log-probabilities by log-softmax at use.
struct Layer {
  LayerKind kind = LayerKind::Input;
  std::vector<int> scope;  // sorted variable indices
  int width = 0;

  int variable = -1;   // input layers
  int categories = 0;  // input layers

  std::vector<int> children;  // earlier layer ids; sum inputs concatenate
  ProductKind product_kind = ProductKind::Hadamard;

  std::int64_t param_offset = -1;
  int param_rows = 0;
  int param_cols = 0;
};

// Smooth, decomposable probabilistic circuit over categorical variables in
// topological layer order. All computation is in natural-log space; masked
// variables (kMarginalized) are integrated out exactly.
class Circuit {
 public:
  Circuit() = default;

  int num_vars() const { return num_vars_; }
  int output_width() const { return layers_.empty() ? 0 : layers_[root_].width; }
  int root() const { return root_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::span<const int> categories() const { return categories_; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }

  // Connections between computational units (complexity metric).
  std::int64_t connection_count() const;

  void init_params_uniform(Rng& rng, double lo = -0.01, double hi = 0.01);

  // Forward cache: per-layer log outputs plus the row-normalized view of
  // the parameters the pass used (needed by backward and sampling).
  struct Evaluation {
    std::vector<std::int32_t> values;
    std::vector<double> normalized;
    std::vector<std::vector<double>> outs;
    std::span<const double> root_out() const { return outs.back(); }
  };

  // values[v] in [0, categories[v]) or kMarginalized. Root outputs are log
  // values; with every variable masked they are exactly 0.
  Evaluation forward(std::span<const std::int32_t> values) const;

  // Root log value of a single-output circuit.
  double forward_scalar(std::span<const std::int32_t> values) const;

  // Accumulates d(sum_c root_grad[c] * root_log_out[c]) / d(params) into
  // grad. The cache must come from forward() on this circuit.
  void backward(const Evaluation& cache, std::span<const double> root_grad,
                std::span<double> grad) const;

  // Descends from root unit `root_unit`, choosing sum children with
  // probability proportional to exp(weight + cached child log value) and
  // emitting evidence categories where the cache observed them. A null
  // cache samples from the prior (all-marginalized cache).
  void sample_topdown(const Evaluation* cache, int root_unit, Rng& rng,
                      std::span<std::int32_t> out_values) const;

  // Smoothness, decomposability, root arity/normalization checks. Empty
  // result means the structure is valid.
  std::vector<std::string> check_structure() const;

  nlohmann::json structure_to_json() const;
  static Circuit structure_from_json(const nlohmann::json& j);

  friend class CircuitBuilder;

 private:
  std::vector<Layer> layers_;
  int root_ = -1;
  int num_vars_ = 0;
  std::vector<int> categories_;
  std::vector<double> params_;

  void write_normalized(std::span<double> out) const;
};

// Incremental construction; finalize() assigns parameter blocks and scopes.
class CircuitBuilder {
 public:
  CircuitBuilder(int num_vars, std::vector<int> categories);

  int add_input(int variable, int width);
  int add_sum(std::vector<int> children, int width);
  int add_product(std::vector<int> children);

  Circuit finalize(int root);

 private:
  int num_vars_;
  std::vector<int> categories_;
  std::vector<Layer> layers_;
};

struct CompileOptions {
  int sum_units = 1;          // width of internal sum layers
  int input_units = 1;        // width of input layers
  int root_width = 1;         // width of the final sum layer
  int max_product_width = 1 << 20;
};

// Region graph -> layered circuit: leaf regions become input layers,
// partitions become product layers (hadamard when child widths agree, else
// kronecker), regions above partitions become sum layers, and multiple
// roots feed one final sum.
Circuit compile(std::span<const RegionNode* const> roots, const CompileOptions& options,
                std::span<const int> categories);

Circuit compile(const RegionNode& root, const CompileOptions& options,
                std::span<const int> categories);

}  // namespace pgc
