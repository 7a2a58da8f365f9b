#include "pgc/model.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "pgc/logmath.hpp"

namespace pgc {

namespace {

std::vector<double> log_softmaxed(std::span<const double> raw) {
  std::vector<double> out(raw.begin(), raw.end());
  log_softmax_row(out);
  return out;
}

std::vector<double> log_softmaxed_rows(std::span<const double> raw, int rows, int cols) {
  std::vector<double> out(raw.begin(), raw.end());
  for (int r = 0; r < rows; ++r)
    log_softmax_row(std::span<double>(out).subspan(static_cast<std::size_t>(r) * cols, cols));
  return out;
}

// Content hash so the Random ordering is an arbitrary but reproducible
// function of the instance.
std::uint64_t instance_hash(const GraphInstance& g) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h = splitmix64(h);
  };
  mix(static_cast<std::uint64_t>(g.n));
  for (auto c : g.node_labels) mix(static_cast<std::uint64_t>(c) + 1);
  for (auto c : g.edge_labels) mix(static_cast<std::uint64_t>(c) + 7);
  return h;
}

int draw_from_logits(std::span<const double> logits, Rng& rng) {
  const double z = log_sum_exp(logits);
  const double u = rng.uniform01();
  double cum = 0.0;
  int pick = static_cast<int>(logits.size()) - 1;
  for (int i = 0; i < static_cast<int>(logits.size()); ++i) {
    cum += std::exp(logits[i] - z);
    if (u < cum) {
      pick = i;
      break;
    }
  }
  return pick;
}

}  // namespace

Mode parse_mode(const std::string& name) {
  if (name == "ipgc") return Mode::IPgc;
  if (name == "pipgc") return Mode::PiPgc;
  if (name == "spgc") return Mode::SPgc;
  if (name == "nfactpgc") return Mode::NFactPgc;
  throw DataError("unknown mode '" + name + "'; expected one of: ipgc, pipgc, spgc, nfactpgc");
}

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::IPgc: return "ipgc";
    case Mode::PiPgc: return "pipgc";
    case Mode::SPgc: return "spgc";
    case Mode::NFactPgc: return "nfactpgc";
  }
  return "?";
}

void ModelSpec::validate() const {
  meta.validate();
  rg_node.validate();
  rg_edge.validate();
  if (sum_units < 1) throw DataError("n_s must be >= 1 (typical values: 16, 32, 64)");
  if (input_units < 1) throw DataError("n_i must be >= 1 (typical values: 16, 32)");
  if (coupling_units < 1)
    throw DataError("n_c must be >= 1 (typical values: 1, 4, 16, 64, 256, 512)");
  if (factorial_cap < 1) throw DataError("factorial_cap must be >= 1");
  if (mode == Mode::PiPgc && ordering == OrderingKind::None)
    throw DataError("mode pipgc requires an ordering: one of random, bft, dft, rcm");
  if (mode == Mode::NFactPgc && meta.m > factorial_cap)
    throw DataError("mode nfactpgc enumerates n! orderings and is capped at n = " +
                    std::to_string(factorial_cap) + "; meta has m = " + std::to_string(meta.m));
  const bool node_sync = rg_node.kind == RegionGraphKind::RtSync;
  const bool edge_sync = rg_edge.kind == RegionGraphKind::RtSync;
  if (node_sync != edge_sync)
    throw DataError("rt_s synchronizes the node and edge circuits; both must use rg kind rt_s");
  if (node_sync && rg_node.n_repetitions != rg_edge.n_repetitions)
    throw DataError("rt_s requires equal n_repetitions for the node and edge circuits");
}

void QuerySpec::validate(const DatasetMeta& meta) const {
  if (n < 1 || n > meta.m) throw DataError("query: n outside [1, m]");
  if (static_cast<int>(nodes.size()) != meta.m) throw DataError("query: node state list must have length m");
  if (static_cast<int>(edges.size()) != meta.num_edge_vars())
    throw DataError("query: edge state list must have length m(m-1)/2");
  for (int i = 0; i < meta.m; ++i) {
    if (i >= n && nodes[i] != kMarginalized)
      throw DataError("query: padding node " + std::to_string(i) + " must be marginalized");
    if (nodes[i] != kMarginalized && (nodes[i] < 0 || nodes[i] >= meta.n_x))
      throw DataError("query: node category out of range");
  }
  for (int i = 1; i < meta.m; ++i)
    for (int j = 0; j < i; ++j) {
      const auto v = edges[tri_index(i, j)];
      if (i >= n && v != kMarginalized)
        throw DataError("query: padding edge (" + std::to_string(i) + "," + std::to_string(j) +
                        ") must be marginalized");
      if (v != kMarginalized && (v < 0 || v >= meta.n_a))
        throw DataError("query: edge category out of range");
    }
}

QuerySpec QuerySpec::all_marginalized(const DatasetMeta& meta, int n) {
  QuerySpec q;
  q.n = n;
  q.nodes.assign(meta.m, kMarginalized);
  q.edges.assign(meta.num_edge_vars(), kMarginalized);
  return q;
}

QuerySpec QuerySpec::observe(const GraphInstance& g, const DatasetMeta& meta) {
  QuerySpec q = all_marginalized(meta, g.n);
  const auto padded = pad(g, meta);
  q.nodes = padded.node_assignment();
  q.edges = padded.edge_assignment();
  return q;
}

QuerySpec QuerySpec::from_json(const nlohmann::json& j, const DatasetMeta& meta) {
  QuerySpec q = all_marginalized(meta, j.at("n").get<int>());
  auto assign = [](const nlohmann::json& v, const std::string& what) -> std::int32_t {
    if (v.is_string()) {
      if (v.get<std::string>() == "marg") return kMarginalized;
      throw DataError("query json: " + what + " must be a category or \"marg\"");
    }
    return v.get<std::int32_t>();
  };
  if (j.contains("nodes")) {
    for (const auto& [key, value] : j["nodes"].items()) {
      const int i = std::stoi(key);
      if (i < 0 || i >= meta.m) throw DataError("query json: node index out of range");
      q.nodes[i] = assign(value, "node state");
    }
  }
  if (j.contains("edges")) {
    for (const auto& [key, value] : j["edges"].items()) {
      const auto comma = key.find(',');
      if (comma == std::string::npos) throw DataError("query json: edge keys look like \"i,j\"");
      const int i = std::stoi(key.substr(0, comma));
      const int jj = std::stoi(key.substr(comma + 1));
      q.edges[tri_index(std::max(i, jj), std::min(i, jj))] = assign(value, "edge state");
    }
  }
  q.validate(meta);
  return q;
}

nlohmann::json QuerySpec::to_json() const {
  nlohmann::json j;
  j["n"] = n;
  nlohmann::json nodes_j = nlohmann::json::object();
  for (std::size_t i = 0; i < nodes.size(); ++i)
    nodes_j[std::to_string(i)] = nodes[i] == kMarginalized ? nlohmann::json("marg") : nlohmann::json(nodes[i]);
  j["nodes"] = std::move(nodes_j);
  nlohmann::json edges_j = nlohmann::json::object();
  int m = 1;
  while (m * (m - 1) / 2 < static_cast<int>(edges.size())) ++m;
  for (int i = 1; i < m; ++i)
    for (int jj = 0; jj < i; ++jj) {
      const auto v = edges[tri_index(i, jj)];
      edges_j[std::to_string(i) + "," + std::to_string(jj)] =
          v == kMarginalized ? nlohmann::json("marg") : nlohmann::json(v);
    }
  j["edges"] = std::move(edges_j);
  return j;
}

PgcModel PgcModel::create(const ModelSpec& spec, const std::vector<GraphInstance>* structure_data) {
  spec.validate();
  PgcModel model;
  model.spec_ = spec;
  const auto& meta = spec.meta;
  model.coupling_.assign(spec.coupling_units, 0.0);
  model.cardinality_.assign(meta.m, 0.0);

  if (spec.mode == Mode::IPgc) {
    model.theta_node_.assign(static_cast<std::size_t>(spec.coupling_units) * meta.n_x, 0.0);
    model.theta_edge_.assign(static_cast<std::size_t>(spec.coupling_units) * meta.n_a, 0.0);
    model.init_params(derive_seed(spec.seed, 11));
    return model;
  }

  std::vector<int> node_vars(meta.m), edge_vars(meta.num_edge_vars());
  std::iota(node_vars.begin(), node_vars.end(), 0);
  std::iota(edge_vars.begin(), edge_vars.end(), 0);
  const std::vector<int> node_cats(meta.m, meta.n_x);
  const std::vector<int> edge_cats(edge_vars.size(), meta.n_a);

  // Instances seen by structure learning must sit in the scoring frame.
  CategoricalRows node_rows, edge_rows;
  const bool needs_data = spec.rg_node.kind == RegionGraphKind::Hclt ||
                          spec.rg_edge.kind == RegionGraphKind::Hclt;
  if (needs_data) {
    if (structure_data == nullptr)
      throw DataError("hclt region graphs learn their structure from data; pass the training set");
    for (const auto& g : *structure_data) {
      const auto padded = pad(model.to_eval_frame(g), meta);
      node_rows.push_back(padded.node_assignment());
      edge_rows.push_back(padded.edge_assignment());
    }
  }

  auto build_roots = [&](const RegionGraphSpec& rg, std::span<const int> vars,
                         std::span<const int> cats, const CategoricalRows& rows,
                         const char* which) -> std::vector<RegionPtr> {
    std::vector<RegionPtr> roots;
    switch (rg.kind) {
      case RegionGraphKind::Bt:
        roots.push_back(build_bt(vars, rg.n_layers));
        break;
      case RegionGraphKind::Lt:
        roots.push_back(build_lt(vars, rg.n_layers));
        break;
      case RegionGraphKind::Rt:
        roots = build_rt(vars, rg.n_layers, rg.n_repetitions, rg.seed);
        break;
      case RegionGraphKind::Hclt: {
        bool fell_back = false;
        roots.push_back(build_hclt(rows, vars, cats, rg.smoothing, &fell_back));
        if (fell_back)
          std::cerr << "hclt(" << which << "): no structure data, falling back to lt\n";
        break;
      }
      case RegionGraphKind::RtSync:
        break;  // handled jointly below
    }
    return roots;
  };

  std::vector<RegionPtr> node_roots, edge_roots;
  if (spec.rg_node.kind == RegionGraphKind::RtSync) {
    auto synced = build_rt_sync(node_vars, edge_vars, meta.m, spec.rg_node.n_layers,
                                spec.rg_edge.n_layers, spec.rg_node.n_repetitions,
                                spec.rg_node.seed);
    node_roots = std::move(synced.node_roots);
    edge_roots = std::move(synced.edge_roots);
  } else {
    node_roots = build_roots(spec.rg_node, node_vars, node_cats, node_rows, "nodes");
    if (!edge_vars.empty())
      edge_roots = build_roots(spec.rg_edge, edge_vars, edge_cats, edge_rows, "edges");
  }

  auto options_for = [&spec](const RegionGraphSpec& rg) {
    CompileOptions options;
    options.sum_units = spec.sum_units;
    // The latent-tree structure carries one mixture width; its inputs match it.
    options.input_units = rg.kind == RegionGraphKind::Hclt ? spec.sum_units : spec.input_units;
    options.root_width = spec.coupling_units;
    return options;
  };
  std::vector<const RegionNode*> ptrs;
  for (const auto& r : node_roots) ptrs.push_back(r.get());
  model.node_circuit_ = compile(ptrs, options_for(spec.rg_node), node_cats);
  if (!edge_roots.empty()) {
    ptrs.clear();
    for (const auto& r : edge_roots) ptrs.push_back(r.get());
    model.edge_circuit_ = compile(ptrs, options_for(spec.rg_edge), edge_cats);
  }
  model.init_params(derive_seed(spec.seed, 11));
  return model;
}

std::size_t PgcModel::num_params() const {
  std::size_t total = coupling_.size() + cardinality_.size();
  if (spec_.mode == Mode::IPgc) return total + theta_node_.size() + theta_edge_.size();
  total += node_circuit_->param_count();
  if (edge_circuit_) total += edge_circuit_->param_count();
  return total;
}

void PgcModel::get_params(std::span<double> out) const {
  if (out.size() != num_params()) throw DataError("get_params: buffer size mismatch");
  auto it = out.begin();
  auto emit = [&it](std::span<const double> xs) { it = std::copy(xs.begin(), xs.end(), it); };
  if (spec_.mode == Mode::IPgc) {
    emit(theta_node_);
    emit(theta_edge_);
  } else {
    emit(node_circuit_->params());
    if (edge_circuit_) emit(edge_circuit_->params());
  }
  emit(coupling_);
  emit(cardinality_);
}

void PgcModel::set_params(std::span<const double> in) {
  if (in.size() != num_params()) throw DataError("set_params: buffer size mismatch");
  auto it = in.begin();
  auto take = [&it](std::span<double> xs) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(xs.size()), xs.begin());
    it += static_cast<std::ptrdiff_t>(xs.size());
  };
  if (spec_.mode == Mode::IPgc) {
    take(theta_node_);
    take(theta_edge_);
  } else {
    take(node_circuit_->params());
    if (edge_circuit_) take(edge_circuit_->params());
  }
  take(coupling_);
  take(cardinality_);
}

void PgcModel::init_params(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> params(num_params());
  for (auto& p : params) p = -0.01 + 0.02 * rng.uniform01();
  set_params(params);
}

double PgcModel::log_cardinality_at(int n) const {
  return log_softmaxed(cardinality_)[n - 1];
}

std::vector<double> PgcModel::log_cardinality() const { return log_softmaxed(cardinality_); }

std::uint64_t PgcModel::ordering_seed_for(const GraphInstance& g) const {
  return derive_seed(spec_.seed, instance_hash(g));
}

GraphInstance PgcModel::to_eval_frame(const GraphInstance& g) const {
  if (spec_.mode != Mode::PiPgc) return g;
  return canonicalize(g, spec_.ordering, ordering_seed_for(g));
}

struct PgcModel::JointEval {
  Circuit::Evaluation node_eval;
  Circuit::Evaluation edge_eval;
  std::vector<double> component_logits;
  std::vector<double> responsibilities;
};

double PgcModel::circuit_joint(std::span<const std::int32_t> node_vals,
                               std::span<const std::int32_t> edge_vals, JointEval* eval) const {
  const auto coupling = log_softmaxed(coupling_);
  JointEval local;
  JointEval& je = eval ? *eval : local;
  je.node_eval = node_circuit_->forward(node_vals);
  if (edge_circuit_) je.edge_eval = edge_circuit_->forward(edge_vals);
  je.component_logits.resize(coupling.size());
  for (std::size_t c = 0; c < coupling.size(); ++c) {
    je.component_logits[c] = coupling[c] + je.node_eval.root_out()[c] +
                             (edge_circuit_ ? je.edge_eval.root_out()[c] : 0.0);
  }
  const double total = log_sum_exp(je.component_logits);
  je.responsibilities.resize(coupling.size());
  for (std::size_t c = 0; c < coupling.size(); ++c)
    je.responsibilities[c] = std::exp(je.component_logits[c] - total);
  return total;
}

double PgcModel::ipgc_joint(std::span<const std::int32_t> node_vals,
                            std::span<const std::int32_t> edge_vals,
                            std::vector<double>* responsibilities) const {
  const int n_c = spec_.coupling_units;
  const auto mix = log_softmaxed(coupling_);
  const auto theta_x = log_softmaxed_rows(theta_node_, n_c, spec_.meta.n_x);
  const auto theta_a = log_softmaxed_rows(theta_edge_, n_c, spec_.meta.n_a);
  std::vector<double> logits(n_c);
  for (int z = 0; z < n_c; ++z) {
    double score = mix[z];
    for (const auto v : node_vals)
      if (v != kMarginalized) score += theta_x[static_cast<std::size_t>(z) * spec_.meta.n_x + v];
    for (const auto v : edge_vals)
      if (v != kMarginalized) score += theta_a[static_cast<std::size_t>(z) * spec_.meta.n_a + v];
    logits[z] = score;
  }
  const double total = log_sum_exp(logits);
  if (responsibilities) {
    responsibilities->resize(n_c);
    for (int z = 0; z < n_c; ++z) (*responsibilities)[z] = std::exp(logits[z] - total);
  }
  return total;
}

double PgcModel::joint_logp(std::span<const std::int32_t> node_vals,
                            std::span<const std::int32_t> edge_vals) const {
  if (spec_.mode == Mode::IPgc) return ipgc_joint(node_vals, edge_vals, nullptr);
  return circuit_joint(node_vals, edge_vals, nullptr);
}

double PgcModel::logp_joint_fixed(const GraphInstance& g) const {
  const auto padded = pad(g, spec_.meta);
  return joint_logp(padded.node_assignment(), padded.edge_assignment());
}

double PgcModel::logp_ipgc_component(const GraphInstance& g, int z) const {
  if (spec_.mode != Mode::IPgc) throw DataError("logp_ipgc_component: model mode is not ipgc");
  if (z < 0 || z >= spec_.coupling_units) throw DataError("logp_ipgc_component: component out of range");
  g.validate(spec_.meta);
  const auto theta_x = log_softmaxed_rows(theta_node_, spec_.coupling_units, spec_.meta.n_x);
  const auto theta_a = log_softmaxed_rows(theta_edge_, spec_.coupling_units, spec_.meta.n_a);
  double score = 0.0;
  for (const auto c : g.node_labels) score += theta_x[static_cast<std::size_t>(z) * spec_.meta.n_x + c];
  for (const auto c : g.edge_labels) score += theta_a[static_cast<std::size_t>(z) * spec_.meta.n_a + c];
  return score;
}

double PgcModel::logp(const GraphInstance& g) const {
  g.validate(spec_.meta);
  switch (spec_.mode) {
    case Mode::SPgc:
    case Mode::IPgc:
      return logp_joint_fixed(g) + log_cardinality_at(g.n);
    case Mode::PiPgc:
      return logp_joint_fixed(to_eval_frame(g)) + log_cardinality_at(g.n);
    case Mode::NFactPgc: {
      if (g.n > spec_.factorial_cap)
        throw DataError("nfactpgc: n = " + std::to_string(g.n) + " exceeds factorial_cap = " +
                        std::to_string(spec_.factorial_cap));
      Permutation p = Permutation::identity(g.n);
      std::vector<double> terms;
      do {
        terms.push_back(logp_joint_fixed(permute(g, p)));
      } while (std::next_permutation(p.map.begin(), p.map.end()));
      double log_factorial = 0.0;
      for (int i = 2; i <= g.n; ++i) log_factorial += std::log(static_cast<double>(i));
      return log_sum_exp(terms) - log_factorial + log_cardinality_at(g.n);
    }
  }
  throw DataError("logp: unknown mode");
}

double PgcModel::joint_logp_with_grad(const GraphInstance& g, std::span<double> grad) const {
  // Gradient of the fixed-order joint; weight 1.
  const auto padded = pad(g, spec_.meta);
  const auto node_vals = padded.node_assignment();
  const auto edge_vals = padded.edge_assignment();

  if (spec_.mode == Mode::IPgc) {
    std::vector<double> resp;
    const double total = ipgc_joint(node_vals, edge_vals, &resp);
    const int n_c = spec_.coupling_units;
    const int n_x = spec_.meta.n_x;
    const int n_a = spec_.meta.n_a;
    const auto theta_x = log_softmaxed_rows(theta_node_, n_c, n_x);
    const auto theta_a = log_softmaxed_rows(theta_edge_, n_c, n_a);
    const auto mix = log_softmaxed(coupling_);
    std::vector<double> count_x(n_x, 0.0), count_a(n_a, 0.0);
    double observed_nodes = 0.0, observed_edges = 0.0;
    for (const auto v : node_vals)
      if (v != kMarginalized) {
        count_x[v] += 1.0;
        observed_nodes += 1.0;
      }
    for (const auto v : edge_vals)
      if (v != kMarginalized) {
        count_a[v] += 1.0;
        observed_edges += 1.0;
      }
    auto gx = grad.subspan(0, theta_node_.size());
    auto ga = grad.subspan(theta_node_.size(), theta_edge_.size());
    auto gmix = grad.subspan(theta_node_.size() + theta_edge_.size(), coupling_.size());
    for (int z = 0; z < n_c; ++z) {
      for (int c = 0; c < n_x; ++c)
        gx[static_cast<std::size_t>(z) * n_x + c] +=
            resp[z] * (count_x[c] - std::exp(theta_x[static_cast<std::size_t>(z) * n_x + c]) * observed_nodes);
      for (int c = 0; c < n_a; ++c)
        ga[static_cast<std::size_t>(z) * n_a + c] +=
            resp[z] * (count_a[c] - std::exp(theta_a[static_cast<std::size_t>(z) * n_a + c]) * observed_edges);
      gmix[z] += resp[z] - std::exp(mix[z]);
    }
    return total;
  }

  JointEval je;
  const double total = circuit_joint(node_vals, edge_vals, &je);
  const std::size_t node_count = node_circuit_->param_count();
  const std::size_t edge_count = edge_circuit_ ? edge_circuit_->param_count() : 0;
  node_circuit_->backward(je.node_eval, je.responsibilities, grad.subspan(0, node_count));
  if (edge_circuit_)
    edge_circuit_->backward(je.edge_eval, je.responsibilities, grad.subspan(node_count, edge_count));
  auto gcpl = grad.subspan(node_count + edge_count, coupling_.size());
  const auto coupling = log_softmaxed(coupling_);
  for (std::size_t c = 0; c < coupling_.size(); ++c)
    gcpl[c] += je.responsibilities[c] - std::exp(coupling[c]);
  return total;
}

double PgcModel::logp_with_grad(const GraphInstance& g, std::span<double> grad) const {
  if (grad.size() != num_params()) throw DataError("logp_with_grad: gradient buffer size mismatch");
  g.validate(spec_.meta);
  auto gcard = grad.subspan(grad.size() - cardinality_.size(), cardinality_.size());
  const auto card = log_softmaxed(cardinality_);
  for (std::size_t k = 0; k < cardinality_.size(); ++k)
    gcard[k] += (static_cast<int>(k) == g.n - 1 ? 1.0 : 0.0) - std::exp(card[k]);

  switch (spec_.mode) {
    case Mode::SPgc:
    case Mode::IPgc:
      return joint_logp_with_grad(g, grad) + card[g.n - 1];
    case Mode::PiPgc:
      return joint_logp_with_grad(to_eval_frame(g), grad) + card[g.n - 1];
    case Mode::NFactPgc: {
      if (g.n > spec_.factorial_cap)
        throw DataError("nfactpgc: n exceeds factorial_cap");
      // Pass 1: per-ordering joints; pass 2: responsibility-weighted grads.
      Permutation p = Permutation::identity(g.n);
      std::vector<double> terms;
      do {
        terms.push_back(logp_joint_fixed(permute(g, p)));
      } while (std::next_permutation(p.map.begin(), p.map.end()));
      const double lse = log_sum_exp(terms);
      std::vector<double> scratch(grad.size(), 0.0);
      p = Permutation::identity(g.n);
      std::size_t idx = 0;
      do {
        const double weight = std::exp(terms[idx++] - lse);
        std::fill(scratch.begin(), scratch.end(), 0.0);
        joint_logp_with_grad(permute(g, p), scratch);
        for (std::size_t i = 0; i < scratch.size(); ++i) grad[i] += weight * scratch[i];
      } while (std::next_permutation(p.map.begin(), p.map.end()));
      double log_factorial = 0.0;
      for (int i = 2; i <= g.n; ++i) log_factorial += std::log(static_cast<double>(i));
      return lse - log_factorial + card[g.n - 1];
    }
  }
  throw DataError("logp_with_grad: unknown mode");
}

double PgcModel::query(const QuerySpec& q) const {
  q.validate(spec_.meta);
  return joint_logp(q.nodes, q.edges) + log_cardinality_at(q.n);
}

PgcModel::ConditionalContext PgcModel::condition_on(const GraphInstance& evidence) const {
  ConditionalContext ctx;
  ctx.evidence = evidence.n == 0 ? evidence : to_eval_frame(evidence);
  if (ctx.evidence.n > 0) ctx.evidence.validate(spec_.meta);
  const int k = ctx.evidence.n;

  // Evidence assignment: scaffold observed, everything else marginalized.
  QuerySpec q = QuerySpec::all_marginalized(spec_.meta, std::max(k, 1));
  for (int i = 0; i < k; ++i) q.nodes[i] = ctx.evidence.node_labels[i];
  for (int i = 1; i < k; ++i)
    for (int j = 0; j < i; ++j) q.edges[tri_index(i, j)] = ctx.evidence.edge_labels[tri_index(i, j)];

  // Posterior over the node count: p(evidence | n) p(n) for n = max(k,1)..m.
  ctx.log_n_posterior.assign(spec_.meta.m, kNegInf);
  for (int n = std::max(k, 1); n <= spec_.meta.m; ++n) {
    QuerySpec qn = q;
    qn.n = n;
    ctx.log_n_posterior[n - 1] = query(qn);
  }

  if (spec_.mode == Mode::IPgc) {
    std::vector<double> resp;
    ipgc_joint(q.nodes, q.edges, &resp);
    ctx.component_logits.resize(resp.size());
    for (std::size_t z = 0; z < resp.size(); ++z)
      ctx.component_logits[z] = std::log(std::max(resp[z], 1e-300));
  } else {
    JointEval je;
    circuit_joint(q.nodes, q.edges, &je);
    ctx.node_eval = std::move(je.node_eval);
    ctx.edge_eval = std::move(je.edge_eval);
    ctx.component_logits = std::move(je.component_logits);
  }
  return ctx;
}

GraphInstance PgcModel::sample_conditional(const ConditionalContext& ctx, Rng& rng) const {
  const int n = draw_from_logits(ctx.log_n_posterior, rng) + 1;
  const int component = draw_from_logits(ctx.component_logits, rng);
  const int k = ctx.evidence.n;

  GraphInstance g;
  g.n = n;
  g.node_labels.assign(n, 0);
  g.edge_labels.assign(static_cast<std::size_t>(n) * (n - 1) / 2, 0);

  if (spec_.mode == Mode::IPgc) {
    const auto theta_x = log_softmaxed_rows(theta_node_, spec_.coupling_units, spec_.meta.n_x);
    const auto theta_a = log_softmaxed_rows(theta_edge_, spec_.coupling_units, spec_.meta.n_a);
    const auto row_x = std::span<const double>(theta_x).subspan(
        static_cast<std::size_t>(component) * spec_.meta.n_x, spec_.meta.n_x);
    const auto row_a = std::span<const double>(theta_a).subspan(
        static_cast<std::size_t>(component) * spec_.meta.n_a, spec_.meta.n_a);
    for (int i = 0; i < n; ++i)
      g.node_labels[i] = i < k ? ctx.evidence.node_labels[i]
                               : static_cast<std::int32_t>(draw_from_logits(row_x, rng));
    for (int i = 1; i < n; ++i)
      for (int j = 0; j < i; ++j)
        g.edge_labels[tri_index(i, j)] =
            i < k ? ctx.evidence.edge_labels[tri_index(i, j)]
                  : static_cast<std::int32_t>(draw_from_logits(row_a, rng));
    return g;
  }

  std::vector<std::int32_t> node_vals(spec_.meta.m, kMarginalized);
  node_circuit_->sample_topdown(&ctx.node_eval, component, rng, node_vals);
  std::vector<std::int32_t> edge_vals(spec_.meta.num_edge_vars(), kMarginalized);
  if (edge_circuit_) edge_circuit_->sample_topdown(&ctx.edge_eval, component, rng, edge_vals);

  for (int i = 0; i < n; ++i) g.node_labels[i] = node_vals[i];
  for (int i = 1; i < n; ++i)
    for (int j = 0; j < i; ++j) g.edge_labels[tri_index(i, j)] = edge_vals[tri_index(i, j)];

  // The permutation-averaged joint is a uniform mixture over relabelings of
  // the fixed-order draw; with a scaffold the fixed frame must be kept so
  // the evidence stays in its slots.
  if (spec_.mode == Mode::NFactPgc && k == 0) {
    Permutation p = Permutation::identity(n);
    rng.shuffle(std::span<std::int32_t>(p.map));
    return permute(g, p);
  }
  return g;
}

GraphInstance PgcModel::sample_conditional(const GraphInstance& evidence, Rng& rng) const {
  return sample_conditional(condition_on(evidence), rng);
}

GraphInstance PgcModel::sample(Rng& rng) const {
  GraphInstance empty;
  return sample_conditional(condition_on(empty), rng);
}

std::vector<std::string> PgcModel::check() const {
  std::vector<std::string> out;
  if (spec_.mode == Mode::IPgc) {
    if (theta_node_.size() != static_cast<std::size_t>(spec_.coupling_units) * spec_.meta.n_x)
      out.push_back("node table shape mismatch");
    if (theta_edge_.size() != static_cast<std::size_t>(spec_.coupling_units) * spec_.meta.n_a)
      out.push_back("edge table shape mismatch");
  } else {
    for (const auto& v : node_circuit_->check_structure()) out.push_back("node circuit: " + v);
    if (node_circuit_->output_width() != spec_.coupling_units)
      out.push_back("node circuit output width != n_c");
    if (edge_circuit_) {
      for (const auto& v : edge_circuit_->check_structure()) out.push_back("edge circuit: " + v);
      if (edge_circuit_->output_width() != spec_.coupling_units)
        out.push_back("edge circuit output width != n_c");
    }
  }
  if (static_cast<int>(coupling_.size()) != spec_.coupling_units)
    out.push_back("coupling weight vector length != n_c");
  if (static_cast<int>(cardinality_.size()) != spec_.meta.m)
    out.push_back("cardinality logit vector length != m");
  return out;
}

nlohmann::json PgcModel::structure_to_json() const {
  nlohmann::json j;
  j["meta"] = {{"m", spec_.meta.m}, {"n_x", spec_.meta.n_x}, {"n_a", spec_.meta.n_a}};
  if (!spec_.meta.atom_names.empty()) j["meta"]["atom_names"] = spec_.meta.atom_names;
  j["mode"] = mode_name(spec_.mode);
  j["ordering"] = ordering_name(spec_.ordering);
  j["n_s"] = spec_.sum_units;
  j["n_i"] = spec_.input_units;
  j["n_c"] = spec_.coupling_units;
  j["factorial_cap"] = spec_.factorial_cap;
  j["seed"] = spec_.seed;
  auto rg_json = [](const RegionGraphSpec& rg) {
    return nlohmann::json{{"kind", region_graph_kind_name(rg.kind)},
                          {"n_layers", rg.n_layers},
                          {"n_repetitions", rg.n_repetitions},
                          {"seed", rg.seed},
                          {"smoothing", rg.smoothing}};
  };
  j["rg_node"] = rg_json(spec_.rg_node);
  j["rg_edge"] = rg_json(spec_.rg_edge);
  if (spec_.mode != Mode::IPgc) {
    j["node_circuit"] = node_circuit_->structure_to_json();
    if (edge_circuit_) j["edge_circuit"] = edge_circuit_->structure_to_json();
  }
  return j;
}

PgcModel PgcModel::from_structure_json(const nlohmann::json& j) {
  PgcModel model;
  ModelSpec spec;
  spec.meta.m = j.at("meta").at("m").get<int>();
  spec.meta.n_x = j.at("meta").at("n_x").get<int>();
  spec.meta.n_a = j.at("meta").at("n_a").get<int>();
  if (j.at("meta").contains("atom_names"))
    spec.meta.atom_names = j["meta"]["atom_names"].get<std::vector<std::string>>();
  spec.mode = parse_mode(j.at("mode").get<std::string>());
  spec.ordering = parse_ordering(j.at("ordering").get<std::string>());
  spec.sum_units = j.at("n_s").get<int>();
  spec.input_units = j.at("n_i").get<int>();
  spec.coupling_units = j.at("n_c").get<int>();
  spec.factorial_cap = j.at("factorial_cap").get<int>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  auto rg_from = [](const nlohmann::json& r) {
    RegionGraphSpec rg;
    rg.kind = parse_region_graph_kind(r.at("kind").get<std::string>());
    rg.n_layers = r.at("n_layers").get<int>();
    rg.n_repetitions = r.at("n_repetitions").get<int>();
    rg.seed = r.at("seed").get<std::uint64_t>();
    rg.smoothing = r.at("smoothing").get<double>();
    return rg;
  };
  spec.rg_node = rg_from(j.at("rg_node"));
  spec.rg_edge = rg_from(j.at("rg_edge"));
  model.spec_ = spec;
  model.coupling_.assign(spec.coupling_units, 0.0);
  model.cardinality_.assign(spec.meta.m, 0.0);
  if (spec.mode == Mode::IPgc) {
    model.theta_node_.assign(static_cast<std::size_t>(spec.coupling_units) * spec.meta.n_x, 0.0);
    model.theta_edge_.assign(static_cast<std::size_t>(spec.coupling_units) * spec.meta.n_a, 0.0);
    return model;
  }
  model.node_circuit_ = Circuit::structure_from_json(j.at("node_circuit"));
  if (j.contains("edge_circuit"))
    model.edge_circuit_ = Circuit::structure_from_json(j.at("edge_circuit"));
  return model;
}

}  // namespace pgc
