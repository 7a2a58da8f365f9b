#include "pgc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "pgc/rng.hpp"

namespace pgc {

void ValencyTable::validate(const DatasetMeta& meta) const {
  if (static_cast<int>(max_valence.size()) != meta.n_x)
    throw DataError("valency: need one max valence per node category");
  if (static_cast<int>(bond_orders.size()) != meta.n_a)
    throw DataError("valency: need one bond order per edge category");
  if (bond_orders[0] != 0) throw DataError("valency: the no-edge category must have bond order 0");
  for (int v : max_valence)
    if (v < 0) throw DataError("valency: max valence must be nonnegative");
}

ValencyTable ValencyTable::qm9_default() {
  ValencyTable vt;
  vt.max_valence = {4, 3, 2, 1};
  vt.bond_orders = {0, 1, 2, 3};
  return vt;
}

ValencyTable ValencyTable::load(const std::string& path, const DatasetMeta& meta) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open valency file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  ValencyTable vt;
  vt.max_valence = j.at("max_valence").get<std::vector<int>>();
  vt.bond_orders = j.at("bond_orders").get<std::vector<int>>();
  vt.validate(meta);
  return vt;
}

bool is_valid(const GraphInstance& g, const ValencyTable& vt) {
  for (const auto c : g.node_labels)
    if (c < 0 || c >= static_cast<std::int32_t>(vt.max_valence.size()))
      throw DataError("is_valid: node category outside the valency table");
  for (const auto c : g.edge_labels)
    if (c < 0 || c >= static_cast<std::int32_t>(vt.bond_orders.size()))
      throw DataError("is_valid: edge category outside the valency table");

  std::vector<int> order_sum(g.n, 0);
  for (int i = 1; i < g.n; ++i)
    for (int j = 0; j < i; ++j) {
      const int order = vt.bond_orders[g.edge_labels[tri_index(i, j)]];
      order_sum[i] += order;
      order_sum[j] += order;
    }
  for (int i = 0; i < g.n; ++i)
    if (order_sum[i] > vt.max_valence[g.node_labels[i]]) return false;

  // single connected component
  if (g.n == 1) return true;
  std::vector<bool> visited(g.n, false);
  std::vector<int> stack{0};
  visited[0] = true;
  int seen = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v = 0; v < g.n; ++v) {
      if (v == u || visited[v]) continue;
      if (g.edge(u, v) != 0) {
        visited[v] = true;
        ++seen;
        stack.push_back(v);
      }
    }
  }
  return seen == g.n;
}

namespace {

// Breadth-first serialization from one start; expansion ties are broken by
// (edge label to the current node, node label, degree, source index).
std::string bfs_serialization(const GraphInstance& g, int start) {
  std::vector<int> degree(g.n, 0);
  for (int i = 1; i < g.n; ++i)
    for (int j = 0; j < i; ++j)
      if (g.edge_labels[tri_index(i, j)] != 0) {
        ++degree[i];
        ++degree[j];
      }

  std::vector<int> rank(g.n, -1);
  std::vector<int> visit;
  visit.reserve(g.n);
  auto push = [&](int v) {
    rank[v] = static_cast<int>(visit.size());
    visit.push_back(v);
  };
  push(start);
  for (std::size_t head = 0; head < visit.size(); ++head) {
    const int u = visit[head];
    std::vector<int> next;
    for (int v = 0; v < g.n; ++v)
      if (v != u && rank[v] < 0 && g.edge(u, v) != 0) next.push_back(v);
    std::sort(next.begin(), next.end(), [&](int a, int b) {
      const auto ka = std::tuple(g.edge(u, a), g.node_labels[a], degree[a], a);
      const auto kb = std::tuple(g.edge(u, b), g.node_labels[b], degree[b], b);
      return ka < kb;
    });
    for (int v : next) push(v);
    // disconnected remainder: restart at the invariant-key minimum
    if (head + 1 == visit.size() && static_cast<int>(visit.size()) < g.n) {
      int pick = -1;
      for (int v = 0; v < g.n; ++v) {
        if (rank[v] >= 0) continue;
        if (pick < 0 || std::tuple(g.node_labels[v], degree[v], v) <
                            std::tuple(g.node_labels[pick], degree[pick], pick))
          pick = v;
      }
      push(pick);
    }
  }

  std::string bytes;
  bytes.reserve(2 + g.n + g.edge_labels.size());
  bytes.push_back(static_cast<char>(g.n));
  for (int i = 0; i < g.n; ++i) bytes.push_back(static_cast<char>(g.node_labels[visit[i]]));
  for (int i = 1; i < g.n; ++i)
    for (int j = 0; j < i; ++j) bytes.push_back(static_cast<char>(g.edge(visit[i], visit[j])));
  return bytes;
}

}  // namespace

std::string certificate(const GraphInstance& g) {
  std::string best;
  for (int start = 0; start < g.n; ++start) {
    std::string s = bfs_serialization(g, start);
    if (best.empty() || s < best) best = std::move(s);
  }
  return best;
}

MetricsReport metrics_suite(std::span<const GraphInstance> samples,
                            std::span<const GraphInstance> train_set, const ValencyTable& vt) {
  MetricsReport report;
  report.sample_count = samples.size();
  if (samples.empty()) return report;

  std::vector<const GraphInstance*> valid;
  for (const auto& g : samples)
    if (is_valid(g, vt)) valid.push_back(&g);
  report.valid_pct = 100.0 * static_cast<double>(valid.size()) / static_cast<double>(samples.size());
  if (valid.empty()) return report;

  std::set<std::string> unique_certs;
  for (const auto* g : valid) unique_certs.insert(certificate(*g));
  report.unique_pct =
      100.0 * static_cast<double>(unique_certs.size()) / static_cast<double>(valid.size());

  std::set<std::string> train_certs;
  for (const auto& g : train_set) train_certs.insert(certificate(g));
  std::size_t novel = 0;
  for (const auto& cert : unique_certs)
    if (!train_certs.contains(cert)) ++novel;
  report.novel_pct = 100.0 * static_cast<double>(novel) / static_cast<double>(unique_certs.size());
  return report;
}

double auc(std::span<const double> scores_pos, std::span<const double> scores_neg) {
  if (scores_pos.empty() || scores_neg.empty()) throw DataError("auc: empty score set");
  // Midrank formulation of the Mann-Whitney statistic.
  struct Entry {
    double score;
    bool positive;
  };
  std::vector<Entry> all;
  all.reserve(scores_pos.size() + scores_neg.size());
  for (double s : scores_pos) all.push_back({s, true});
  for (double s : scores_neg) all.push_back({s, false});
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k)
      if (all[k].positive) rank_sum_pos += midrank;
    i = j;
  }
  const double p = static_cast<double>(scores_pos.size());
  const double n = static_cast<double>(scores_neg.size());
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n);
}

AnomalyResult anomaly_experiment(const PgcModel& model, std::span<const GraphInstance> in_set,
                                 std::span<const GraphInstance> out_set, double permute_frac,
                                 std::uint64_t seed, int bins) {
  if (in_set.empty() || out_set.empty()) throw DataError("anomaly: empty evaluation set");
  if (permute_frac < 0.0 || permute_frac > 1.0) throw DataError("anomaly: frac must lie in [0, 1]");

  // Choose exactly floor(frac * |in|) instances to re-permute.
  std::vector<std::size_t> idx(in_set.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(derive_seed(seed, 23));
  rng.shuffle(std::span<std::size_t>(idx));
  const auto permuted_count =
      static_cast<std::size_t>(std::floor(permute_frac * static_cast<double>(in_set.size())));
  std::vector<bool> scramble(in_set.size(), false);
  for (std::size_t i = 0; i < permuted_count; ++i) scramble[idx[i]] = true;

  AnomalyResult result;
  result.scores_in.reserve(in_set.size());
  for (std::size_t i = 0; i < in_set.size(); ++i) {
    GraphInstance g = in_set[i];
    if (scramble[i]) g = permute(g, order_random(g, rng.next_u64()));
    result.scores_in.push_back(model.logp(g));
  }
  result.scores_out.reserve(out_set.size());
  for (const auto& g : out_set) result.scores_out.push_back(model.logp(g));

  result.auc = auc(result.scores_in, result.scores_out);

  double lo = result.scores_in[0], hi = result.scores_in[0];
  for (double s : result.scores_in) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  for (double s : result.scores_out) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  if (hi <= lo) hi = lo + 1.0;
  result.bin_edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b)
    result.bin_edges[b] = lo + (hi - lo) * static_cast<double>(b) / bins;
  result.count_in.assign(bins, 0);
  result.count_out.assign(bins, 0);
  auto bin_of = [&](double s) {
    int b = static_cast<int>((s - lo) / (hi - lo) * bins);
    return std::clamp(b, 0, bins - 1);
  };
  for (double s : result.scores_in) ++result.count_in[bin_of(s)];
  for (double s : result.scores_out) ++result.count_out[bin_of(s)];
  return result;
}

std::vector<double> adjacency_heatmap(std::span<const GraphInstance> data,
                                      const DatasetMeta& meta, OrderingKind kind,
                                      std::uint64_t seed) {
  std::vector<double> acc(static_cast<std::size_t>(meta.m) * meta.m, 0.0);
  if (data.empty()) return acc;
  std::size_t item = 0;
  for (const auto& g : data) {
    const GraphInstance ordered =
        kind == OrderingKind::None ? g : canonicalize(g, kind, derive_seed(seed, item));
    ++item;
    for (int i = 1; i < ordered.n; ++i)
      for (int j = 0; j < i; ++j)
        if (ordered.edge_labels[tri_index(i, j)] != 0) {
          acc[static_cast<std::size_t>(i) * meta.m + j] += 1.0;
          acc[static_cast<std::size_t>(j) * meta.m + i] += 1.0;
        }
  }
  for (auto& v : acc) v /= static_cast<double>(data.size());
  return acc;
}

double bandwidth_weighted_mean(std::span<const double> heatmap, int m) {
  double mass = 0.0, weighted = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const double v = heatmap[static_cast<std::size_t>(i) * m + j];
      mass += v;
      weighted += v * std::abs(i - j);
    }
  return mass > 0.0 ? weighted / mass : 0.0;
}

void write_heatmap_csv(const std::string& path, std::span<const double> heatmap, int m) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw DataError("cannot write heatmap file: " + path);
    out.precision(17);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        if (j) out << ',';
        out << heatmap[static_cast<std::size_t>(i) * m + j];
      }
      out << '\n';
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace pgc
