#include "pgc/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "pgc/logmath.hpp"
#include "pgc/ordering.hpp"

namespace pgc {

double enumeration_size(const DatasetMeta& meta) {
  double total = 0.0;
  for (int n = 1; n <= meta.m; ++n)
    total += std::pow(static_cast<double>(meta.n_x), n) *
             std::pow(static_cast<double>(meta.n_a), n * (n - 1) / 2);
  return total;
}

namespace {

// Odometer increment over a fixed-base label vector; false on wrap-around.
bool advance(std::vector<std::int32_t>& digits, int base) {
  for (auto& d : digits) {
    if (++d < base) return true;
    d = 0;
  }
  return false;
}

}  // namespace

void for_each_graph(const DatasetMeta& meta, std::uint64_t cap,
                    const std::function<void(const GraphInstance&)>& visit) {
  meta.validate();
  const double size = enumeration_size(meta);
  if (size > static_cast<double>(cap))
    throw DataError("enumeration space has " + std::to_string(size) +
                    " graphs, above the cap " + std::to_string(cap));
  GraphInstance g;
  for (int n = 1; n <= meta.m; ++n) {
    g.n = n;
    g.node_labels.assign(n, 0);
    g.edge_labels.assign(static_cast<std::size_t>(n) * (n - 1) / 2, 0);
    do {
      std::fill(g.edge_labels.begin(), g.edge_labels.end(), 0);
      do {
        visit(g);
      } while (advance(g.edge_labels, meta.n_a));
    } while (advance(g.node_labels, meta.n_x));
  }
}

std::vector<GraphInstance> enumerate_graphs(const DatasetMeta& meta, std::uint64_t cap) {
  std::vector<GraphInstance> out;
  for_each_graph(meta, cap, [&out](const GraphInstance& g) { out.push_back(g); });
  return out;
}

double total_mass(const PgcModel& model, std::uint64_t cap) {
  StableSum sum;
  const bool canonical_only = model.mode() == Mode::PiPgc;
  for_each_graph(model.meta(), cap, [&](const GraphInstance& g) {
    if (canonical_only && model.to_eval_frame(g) != g) return;
    sum.add(std::exp(model.logp(g)));
  });
  return sum.value();
}

double oracle_query(const PgcModel& model, const QuerySpec& q) {
  q.validate(model.meta());
  const auto& meta = model.meta();

  // Real variables left open by the query; padding stays marginalized and
  // is handled by the fixed-order joint itself.
  std::vector<int> open_nodes, open_edges;
  for (int i = 0; i < q.n; ++i)
    if (q.nodes[i] == kMarginalized) open_nodes.push_back(i);
  for (int i = 1; i < q.n; ++i)
    for (int j = 0; j < i; ++j)
      if (q.edges[tri_index(i, j)] == kMarginalized) open_edges.push_back(tri_index(i, j));

  GraphInstance g;
  g.n = q.n;
  g.node_labels.assign(q.n, 0);
  g.edge_labels.assign(static_cast<std::size_t>(q.n) * (q.n - 1) / 2, 0);
  for (int i = 0; i < q.n; ++i)
    if (q.nodes[i] != kMarginalized) g.node_labels[i] = q.nodes[i];
  for (int i = 1; i < q.n; ++i)
    for (int j = 0; j < i; ++j) {
      const int e = tri_index(i, j);
      if (q.edges[e] != kMarginalized) g.edge_labels[e] = q.edges[e];
    }

  std::vector<std::int32_t> node_digits(open_nodes.size(), 0);
  std::vector<std::int32_t> edge_digits(open_edges.size(), 0);
  std::vector<double> terms;
  bool more_nodes = true;
  while (more_nodes) {
    for (std::size_t k = 0; k < open_nodes.size(); ++k) g.node_labels[open_nodes[k]] = node_digits[k];
    std::fill(edge_digits.begin(), edge_digits.end(), 0);
    bool more_edges = true;
    while (more_edges) {
      for (std::size_t k = 0; k < open_edges.size(); ++k) g.edge_labels[open_edges[k]] = edge_digits[k];
      terms.push_back(model.logp_joint_fixed(g));
      more_edges = !open_edges.empty() && advance(edge_digits, meta.n_a);
    }
    more_nodes = !open_nodes.empty() && advance(node_digits, meta.n_x);
  }
  return log_sum_exp(terms) + model.log_cardinality()[q.n - 1];
}

double oracle_perm_average(const PgcModel& model, const GraphInstance& g) {
  if (g.n > 6)
    throw DataError("oracle_perm_average: n is capped at 6 (n! orderings are enumerated)");
  Permutation p = Permutation::identity(g.n);
  std::vector<double> terms;
  do {
    terms.push_back(model.logp_joint_fixed(permute(g, p)));
  } while (std::next_permutation(p.map.begin(), p.map.end()));
  double log_factorial = 0.0;
  for (int i = 2; i <= g.n; ++i) log_factorial += std::log(static_cast<double>(i));
  return log_sum_exp(terms) - log_factorial;
}

}  // namespace pgc
