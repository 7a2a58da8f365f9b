#include "pgc/circuit.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <set>

#include "pgc/logmath.hpp"

namespace pgc {

namespace {

// Total width of a sum layer's concatenated child outputs.
int fan_in(const std::vector<Layer>& layers, const Layer& sum) {
  int total = 0;
  for (int c : sum.children) total += layers[c].width;
  return total;
}

}  // namespace

std::int64_t Circuit::connection_count() const {
  std::int64_t total = 0;
  for (const auto& layer : layers_) {
    if (layer.kind == LayerKind::Sum) {
      total += static_cast<std::int64_t>(layer.width) * fan_in(layers_, layer);
    } else if (layer.kind == LayerKind::Product) {
      total += static_cast<std::int64_t>(layer.width) * static_cast<std::int64_t>(layer.children.size());
    }
  }
  return total;
}

void Circuit::init_params_uniform(Rng& rng, double lo, double hi) {
  for (auto& p : params_) p = lo + (hi - lo) * rng.uniform01();
}

void Circuit::write_normalized(std::span<double> out) const {
  std::copy(params_.begin(), params_.end(), out.begin());
  for (const auto& layer : layers_) {
    if (layer.param_offset < 0) continue;
    for (int r = 0; r < layer.param_rows; ++r)
      log_softmax_row(out.subspan(static_cast<std::size_t>(layer.param_offset) +
                                      static_cast<std::size_t>(r) * layer.param_cols,
                                  layer.param_cols));
  }
}

Circuit::Evaluation Circuit::forward(std::span<const std::int32_t> values) const {
  if (static_cast<int>(values.size()) != num_vars_)
    throw DataError("forward: expected " + std::to_string(num_vars_) + " variable values");
  Evaluation ev;
  ev.values.assign(values.begin(), values.end());
  ev.normalized.resize(params_.size());
  write_normalized(ev.normalized);
  ev.outs.resize(layers_.size());

  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const Layer& layer = layers_[li];
    auto& out = ev.outs[li];
    out.assign(layer.width, 0.0);
    switch (layer.kind) {
      case LayerKind::Input: {
        const auto x = values[layer.variable];
        if (x == kMarginalized) break;  // log integral of a normalized unit = 0
        if (x < 0 || x >= layer.categories)
          throw DataError("forward: category " + std::to_string(x) + " out of range for variable " +
                          std::to_string(layer.variable));
        const double* table = ev.normalized.data() + layer.param_offset;
        for (int i = 0; i < layer.width; ++i)
          out[i] = table[static_cast<std::size_t>(i) * layer.param_cols + x];
        break;
      }
      case LayerKind::Sum: {
        // A fully marginalized subtree feeds exact zeros; row-normalized
        // weights then make every unit exactly log 1.
        bool all_zero = true;
        for (int c : layer.children)
          for (double v : ev.outs[c]) all_zero &= v == 0.0;
        if (all_zero) break;
        const double* weights = ev.normalized.data() + layer.param_offset;
        const int cols = layer.param_cols;
        for (int i = 0; i < layer.width; ++i) {
          const double* w = weights + static_cast<std::size_t>(i) * cols;
          double hi = kNegInf;
          int k = 0;
          for (int c : layer.children)
            for (double v : ev.outs[c]) hi = std::max(hi, w[k++] + v);
          double acc = 0.0;
          k = 0;
          for (int c : layer.children)
            for (double v : ev.outs[c]) acc += std::exp(w[k++] + v - hi);
          out[i] = hi + std::log(acc);
        }
        break;
      }
      case LayerKind::Product: {
        if (layer.product_kind == ProductKind::Hadamard) {
          for (int c : layer.children) {
            const auto& in = ev.outs[c];
            for (int i = 0; i < layer.width; ++i) out[i] += in[i];
          }
        } else {
          int stride = layer.width;
          for (int c : layer.children) {
            const auto& in = ev.outs[c];
            const int w = layers_[c].width;
            stride /= w;
            for (int i = 0; i < layer.width; ++i) out[i] += in[(i / stride) % w];
          }
        }
        break;
      }
    }
  }
  return ev;
}

double Circuit::forward_scalar(std::span<const std::int32_t> values) const {
  if (output_width() != 1)
    throw DataError("forward_scalar: circuit output width is not 1");
  return forward(values).root_out()[0];
}

void Circuit::backward(const Evaluation& cache, std::span<const double> root_grad,
                       std::span<double> grad) const {
  if (cache.outs.size() != layers_.size() || cache.normalized.size() != params_.size())
    throw DataError("backward: stale or mismatched forward cache");
  if (static_cast<int>(root_grad.size()) != output_width())
    throw DataError("backward: root gradient width mismatch");
  if (grad.size() != params_.size())
    throw DataError("backward: gradient buffer size mismatch");

  std::vector<std::vector<double>> gout(layers_.size());
  for (std::size_t li = 0; li < layers_.size(); ++li) gout[li].assign(layers_[li].width, 0.0);
  std::copy(root_grad.begin(), root_grad.end(), gout[root_].begin());

  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& layer = layers_[li];
    const auto& g = gout[li];
    switch (layer.kind) {
      case LayerKind::Input: {
        const auto x = cache.values[layer.variable];
        if (x == kMarginalized) break;  // constant output, zero gradient
        const double* table = cache.normalized.data() + layer.param_offset;
        for (int i = 0; i < layer.width; ++i) {
          const double gi = g[i];
          if (gi == 0.0) continue;
          double* gu = grad.data() + layer.param_offset + static_cast<std::size_t>(i) * layer.param_cols;
          const double* row = table + static_cast<std::size_t>(i) * layer.param_cols;
          for (int c = 0; c < layer.param_cols; ++c)
            gu[c] += gi * ((c == x ? 1.0 : 0.0) - std::exp(row[c]));
        }
        break;
      }
      case LayerKind::Sum: {
        const double* weights = cache.normalized.data() + layer.param_offset;
        const int cols = layer.param_cols;
        std::vector<double> geff(cols);
        for (int i = 0; i < layer.width; ++i) {
          const double gi = g[i];
          if (gi == 0.0) continue;
          const double* w = weights + static_cast<std::size_t>(i) * cols;
          const double oi = cache.outs[li][i];
          std::fill(geff.begin(), geff.end(), 0.0);
          double gsum = 0.0;
          int k = 0;
          for (int c : layer.children) {
            auto& gchild = gout[c];
            const auto& in = cache.outs[c];
            for (int u = 0; u < layers_[c].width; ++u, ++k) {
              const double t = gi * std::exp(w[k] + in[u] - oi);
              gchild[u] += t;
              geff[k] = t;
              gsum += t;
            }
          }
          double* gu = grad.data() + layer.param_offset + static_cast<std::size_t>(i) * cols;
          for (int k2 = 0; k2 < cols; ++k2) gu[k2] += geff[k2] - std::exp(w[k2]) * gsum;
        }
        break;
      }
      case LayerKind::Product: {
        if (layer.product_kind == ProductKind::Hadamard) {
          for (int c : layer.children) {
            auto& gchild = gout[c];
            for (int i = 0; i < layer.width; ++i) gchild[i] += g[i];
          }
        } else {
          int stride = layer.width;
          for (int c : layer.children) {
            auto& gchild = gout[c];
            const int w = layers_[c].width;
            stride /= w;
            for (int i = 0; i < layer.width; ++i) gchild[(i / stride) % w] += g[i];
          }
        }
        break;
      }
    }
  }
}

void Circuit::sample_topdown(const Evaluation* cache, int root_unit, Rng& rng,
                             std::span<std::int32_t> out_values) const {
  if (static_cast<int>(out_values.size()) != num_vars_)
    throw DataError("sample_topdown: output buffer size mismatch");
  Evaluation prior;
  if (cache == nullptr) {
    prior = forward(std::vector<std::int32_t>(num_vars_, kMarginalized));
    cache = &prior;
  }
  if (cache->outs.size() != layers_.size())
    throw DataError("sample_topdown: cache does not match this circuit");
  if (root_unit < 0 || root_unit >= output_width())
    throw DataError("sample_topdown: root unit out of range");

  std::vector<std::pair<int, int>> stack{{root_, root_unit}};
  std::vector<double> logits;
  while (!stack.empty()) {
    const auto [li, unit] = stack.back();
    stack.pop_back();
    const Layer& layer = layers_[li];
    switch (layer.kind) {
      case LayerKind::Input: {
        const auto observed = cache->values[layer.variable];
        if (observed != kMarginalized) {
          out_values[layer.variable] = observed;
          break;
        }
        const double* row = cache->normalized.data() + layer.param_offset +
                            static_cast<std::size_t>(unit) * layer.param_cols;
        const double u = rng.uniform01();
        double cum = 0.0;
        std::int32_t pick = layer.categories - 1;
        for (int c = 0; c < layer.categories; ++c) {
          cum += std::exp(row[c]);
          if (u < cum) {
            pick = c;
            break;
          }
        }
        out_values[layer.variable] = pick;
        break;
      }
      case LayerKind::Sum: {
        const int cols = layer.param_cols;
        const double* w = cache->normalized.data() + layer.param_offset +
                          static_cast<std::size_t>(unit) * cols;
        logits.assign(cols, 0.0);
        int k = 0;
        for (int c : layer.children)
          for (double v : cache->outs[c]) {
            logits[k] = w[k] + v;
            ++k;
          }
        const double z = log_sum_exp(logits);
        const double u = rng.uniform01();
        double cum = 0.0;
        int pick = cols - 1;
        for (int k2 = 0; k2 < cols; ++k2) {
          cum += std::exp(logits[k2] - z);
          if (u < cum) {
            pick = k2;
            break;
          }
        }
        for (int c : layer.children) {
          if (pick < layers_[c].width) {
            stack.emplace_back(c, pick);
            break;
          }
          pick -= layers_[c].width;
        }
        break;
      }
      case LayerKind::Product: {
        if (layer.product_kind == ProductKind::Hadamard) {
          for (int c : layer.children) stack.emplace_back(c, unit);
        } else {
          int stride = layer.width;
          for (int c : layer.children) {
            const int w = layers_[c].width;
            stride /= w;
            stack.emplace_back(c, (unit / stride) % w);
          }
        }
        break;
      }
    }
  }
}

std::vector<std::string> Circuit::check_structure() const {
  std::vector<std::string> out;
  auto note = [&out](int li, const std::string& what) {
    out.push_back("layer " + std::to_string(li) + ": " + what);
  };

  if (layers_.empty()) {
    out.push_back("circuit has no layers");
    return out;
  }
  if (root_ < 0 || root_ >= static_cast<int>(layers_.size())) {
    out.push_back("invalid root layer id");
    return out;
  }
  if (layers_[root_].kind != LayerKind::Sum) out.push_back("root is not a sum layer");
  std::vector<int> full(num_vars_);
  for (int v = 0; v < num_vars_; ++v) full[v] = v;
  if (layers_[root_].scope != full) out.push_back("root scope does not cover all variables");

  std::vector<double> normalized(params_.size());
  if (!params_.empty()) write_normalized(normalized);

  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const Layer& layer = layers_[li];
    for (int c : layer.children)
      if (c < 0 || c >= static_cast<int>(li)) note(li, "child does not precede the layer");
    if (layer.width < 1) note(li, "non-positive width");

    if (layer.kind == LayerKind::Input) {
      if (!layer.children.empty()) note(li, "input layer with children");
      if (layer.scope.size() != 1 || layer.scope[0] != layer.variable)
        note(li, "input scope must be its variable");
      if (layer.variable < 0 || layer.variable >= num_vars_) note(li, "variable out of range");
      else if (layer.categories != categories_[layer.variable])
        note(li, "category table does not match the variable");
    } else if (layer.kind == LayerKind::Sum) {
      if (layer.children.empty()) note(li, "sum layer without children");
      for (int c : layer.children)
        if (layers_[c].scope != layer.scope)
          note(li, "sum over children of different scope (smoothness)");
      if (layer.param_cols != fan_in(layers_, layer)) note(li, "weight table width mismatch");
    } else {
      if (layer.children.size() < 2) note(li, "product with fewer than 2 children");
      std::vector<int> merged;
      int kron_width = 1;
      bool widths_equal = true;
      for (int c : layer.children) {
        merged.insert(merged.end(), layers_[c].scope.begin(), layers_[c].scope.end());
        kron_width *= layers_[c].width;
        widths_equal &= layers_[c].width == layers_[layer.children[0]].width;
      }
      std::sort(merged.begin(), merged.end());
      if (std::adjacent_find(merged.begin(), merged.end()) != merged.end())
        note(li, "product children scopes overlap (decomposability)");
      if (merged != layer.scope) note(li, "product scope is not the union of child scopes");
      if (layer.product_kind == ProductKind::Hadamard) {
        if (!widths_equal) note(li, "hadamard product over unequal child widths");
        else if (layer.width != layers_[layer.children[0]].width) note(li, "hadamard width mismatch");
      } else if (layer.width != kron_width) {
        note(li, "kronecker width mismatch");
      }
    }

    // every parameter row must be a normalized log-distribution
    if (layer.param_offset >= 0) {
      for (int r = 0; r < layer.param_rows; ++r) {
        const double z = log_sum_exp(std::span<const double>(
            normalized.data() + layer.param_offset + static_cast<std::size_t>(r) * layer.param_cols,
            static_cast<std::size_t>(layer.param_cols)));
        if (std::abs(z) > 1e-9) note(li, "row " + std::to_string(r) + " does not normalize");
      }
    }
  }
  return out;
}

nlohmann::json Circuit::structure_to_json() const {
  nlohmann::json j;
  j["num_vars"] = num_vars_;
  j["categories"] = categories_;
  j["root"] = root_;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : layers_) {
    nlohmann::json l;
    switch (layer.kind) {
      case LayerKind::Input:
        l["kind"] = "input";
        l["variable"] = layer.variable;
        l["width"] = layer.width;
        break;
      case LayerKind::Sum:
        l["kind"] = "sum";
        l["children"] = layer.children;
        l["width"] = layer.width;
        break;
      case LayerKind::Product:
        l["kind"] = "product";
        l["children"] = layer.children;
        break;
    }
    layers.push_back(std::move(l));
  }
  j["layers"] = std::move(layers);
  return j;
}

Circuit Circuit::structure_from_json(const nlohmann::json& j) {
  CircuitBuilder builder(j.at("num_vars").get<int>(), j.at("categories").get<std::vector<int>>());
  for (const auto& l : j.at("layers")) {
    const auto kind = l.at("kind").get<std::string>();
    if (kind == "input") {
      builder.add_input(l.at("variable").get<int>(), l.at("width").get<int>());
    } else if (kind == "sum") {
      builder.add_sum(l.at("children").get<std::vector<int>>(), l.at("width").get<int>());
    } else if (kind == "product") {
      builder.add_product(l.at("children").get<std::vector<int>>());
    } else {
      throw DataError("circuit structure: unknown layer kind '" + kind + "'");
    }
  }
  return builder.finalize(j.at("root").get<int>());
}

CircuitBuilder::CircuitBuilder(int num_vars, std::vector<int> categories)
    : num_vars_(num_vars), categories_(std::move(categories)) {
  if (num_vars_ < 1) throw DataError("circuit: needs at least one variable");
  if (static_cast<int>(categories_.size()) != num_vars_)
    throw DataError("circuit: category list size mismatch");
  for (int c : categories_)
    if (c < 1) throw DataError("circuit: every variable needs at least one category");
}

int CircuitBuilder::add_input(int variable, int width) {
  if (variable < 0 || variable >= num_vars_) throw DataError("add_input: variable out of range");
  Layer layer;
  layer.kind = LayerKind::Input;
  layer.variable = variable;
  layer.categories = categories_[variable];
  layer.width = width;
  layer.scope = {variable};
  layers_.push_back(std::move(layer));
  return static_cast<int>(layers_.size()) - 1;
}

int CircuitBuilder::add_sum(std::vector<int> children, int width) {
  if (children.empty()) throw DataError("add_sum: needs children");
  Layer layer;
  layer.kind = LayerKind::Sum;
  layer.width = width;
  layer.scope = layers_[children[0]].scope;
  layer.children = std::move(children);
  layers_.push_back(std::move(layer));
  return static_cast<int>(layers_.size()) - 1;
}

int CircuitBuilder::add_product(std::vector<int> children) {
  if (children.size() < 2) throw DataError("add_product: needs at least 2 children");
  Layer layer;
  layer.kind = LayerKind::Product;
  bool widths_equal = true;
  int kron_width = 1;
  for (int c : children) {
    layer.scope.insert(layer.scope.end(), layers_[c].scope.begin(), layers_[c].scope.end());
    widths_equal &= layers_[c].width == layers_[children[0]].width;
    kron_width *= layers_[c].width;
  }
  std::sort(layer.scope.begin(), layer.scope.end());
  layer.product_kind = widths_equal ? ProductKind::Hadamard : ProductKind::Kronecker;
  layer.width = widths_equal ? layers_[children[0]].width : kron_width;
  layer.children = std::move(children);
  layers_.push_back(std::move(layer));
  return static_cast<int>(layers_.size()) - 1;
}

Circuit CircuitBuilder::finalize(int root) {
  Circuit circuit;
  circuit.num_vars_ = num_vars_;
  circuit.categories_ = categories_;
  circuit.layers_ = std::move(layers_);
  circuit.root_ = root;

  std::int64_t offset = 0;
  for (auto& layer : circuit.layers_) {
    if (layer.kind == LayerKind::Input) {
      layer.param_rows = layer.width;
      layer.param_cols = layer.categories;
    } else if (layer.kind == LayerKind::Sum) {
      layer.param_rows = layer.width;
      layer.param_cols = fan_in(circuit.layers_, layer);
    } else {
      continue;
    }
    layer.param_offset = offset;
    offset += static_cast<std::int64_t>(layer.param_rows) * layer.param_cols;
  }
  circuit.params_.assign(static_cast<std::size_t>(offset), 0.0);
  return circuit;
}

namespace {

int compile_region(const RegionNode& region, bool as_root, const CompileOptions& options,
                   CircuitBuilder& builder) {
  if (region.is_leaf_region()) {
    const int input = builder.add_input(region.scope[0], options.input_units);
    if (!as_root) return input;
    return builder.add_sum({input}, options.root_width);
  }
  const RegionNode& partition = *region.children.at(0);
  std::vector<int> parts;
  parts.reserve(partition.children.size());
  std::int64_t kron_width = 1;
  bool widths_equal = true;
  int first_width = -1;
  for (const auto& child : partition.children) {
    const int id = compile_region(*child, false, options, builder);
    parts.push_back(id);
    const int w = child->is_leaf_region() ? options.input_units : options.sum_units;
    if (first_width < 0) first_width = w;
    widths_equal &= w == first_width;
    kron_width *= w;
  }
  if (!widths_equal && kron_width > options.max_product_width)
    throw DataError("compile: kronecker product width " + std::to_string(kron_width) +
                    " exceeds the configured cap " + std::to_string(options.max_product_width));
  const int product = builder.add_product(std::move(parts));
  return builder.add_sum({product}, as_root ? options.root_width : options.sum_units);
}

}  // namespace

Circuit compile(std::span<const RegionNode* const> roots, const CompileOptions& options,
                std::span<const int> categories) {
  if (roots.empty()) throw DataError("compile: no region roots");
  if (options.sum_units < 1 || options.input_units < 1 || options.root_width < 1)
    throw DataError("compile: layer widths must be >= 1");

  // All roots must share one scope; it defines the variable space.
  std::vector<int> scope = roots[0]->scope;
  for (const auto* r : roots)
    if (r->scope != scope) throw DataError("compile: region roots disagree on scope");
  const int num_vars = static_cast<int>(scope.size());
  for (int i = 0; i < num_vars; ++i)
    if (scope[i] != i)
      throw DataError("compile: region scope must be exactly the variables [0, n)");
  if (static_cast<int>(categories.size()) != num_vars)
    throw DataError("compile: category table missing for some variables");

  CircuitBuilder builder(num_vars, std::vector<int>(categories.begin(), categories.end()));
  int root_layer;
  if (roots.size() == 1) {
    root_layer = compile_region(*roots[0], true, options, builder);
  } else {
    std::vector<int> mixed;
    mixed.reserve(roots.size());
    for (const auto* r : roots) mixed.push_back(compile_region(*r, false, options, builder));
    root_layer = builder.add_sum(std::move(mixed), options.root_width);
  }
  Circuit circuit = builder.finalize(root_layer);
  if (auto violations = circuit.check_structure(); !violations.empty()) {
    std::string what = "compile: structure check failed:";
    for (const auto& v : violations) what += "\n  " + v;
    throw DataError(what);
  }
  return circuit;
}

Circuit compile(const RegionNode& root, const CompileOptions& options,
                std::span<const int> categories) {
  const RegionNode* ptr = &root;
  return compile(std::span<const RegionNode* const>(&ptr, 1), options, categories);
}

}  // namespace pgc
