// Command-line front end: train, sample, query, eval, anomaly, check, heatmap.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pgc/config.hpp"
#include "pgc/metrics.hpp"
#include "pgc/oracle.hpp"
#include "pgc/train.hpp"

namespace {

using nlohmann::json;

pgc::GraphInstance load_scaffold(const std::string& path, const pgc::DatasetMeta& meta) {
  const auto records = pgc::load_dataset(path, meta);
  if (records.empty()) throw pgc::DataError("scaffold file has no records: " + path);
  return records.front();
}

int cmd_train(const std::string& config_path) {
  auto run = pgc::run_config_from(pgc::parse_config_file(config_path));
  if (run.meta.empty()) throw pgc::DataError("config: missing key 'meta'");
  if (run.dataset.empty()) throw pgc::DataError("config: missing key 'dataset'");
  if (run.out_dir.empty()) throw pgc::DataError("config: missing key 'out_dir'");

  run.model.meta = pgc::load_meta(run.meta);
  const auto data = pgc::load_dataset(run.dataset, run.model.meta);
  if (data.empty()) throw pgc::DataError("dataset is empty: " + run.dataset);
  const auto split = pgc::split_dataset(data, 0.8, 0.1, 0.1, run.model.seed);

  auto model = pgc::PgcModel::create(run.model, &split.train);
  const auto result = pgc::train(model, split.train, split.valid, run.train);

  std::filesystem::create_directories(run.out_dir);
  const auto model_path = run.out_dir + "/model.pgc";
  pgc::save_model(model, model_path);
  pgc::write_trace_csv(run.out_dir + "/trace.csv", result.trace);

  json report;
  report["model"] = model_path;
  report["trace"] = run.out_dir + "/trace.csv";
  report["epochs"] = run.train.epochs;
  report["best_epoch"] = result.best_epoch;
  report["best_valid_nll"] = result.best_valid_nll;
  report["train_instances"] = split.train.size();
  report["test_nll"] = split.test.empty() ? json() : json(pgc::nll(model, split.test));
  std::cout << report.dump(2) << std::endl;
  return 0;
}

int cmd_sample(const std::string& model_path, long count, std::uint64_t seed,
               const std::string& scaffold_path, const std::string& out_path) {
  const auto model = pgc::load_model(model_path);
  pgc::GraphInstance evidence;  // empty scaffold means unconditional
  if (!scaffold_path.empty()) evidence = load_scaffold(scaffold_path, model.meta());
  const auto ctx = model.condition_on(evidence);
  pgc::Rng rng(pgc::derive_seed(seed, 1));
  std::ostringstream lines;
  for (long i = 0; i < count; ++i)
    lines << pgc::graph_to_json_line(model.sample_conditional(ctx, rng)) << '\n';
  if (out_path.empty()) {
    std::cout << lines.str();
  } else {
    pgc::atomic_write_text(out_path, lines.str());
  }
  return 0;
}

int cmd_eval(const std::string& samples_path, const std::string& train_path,
             const std::string& meta_path, const std::string& valency_path,
             const std::string& out_path) {
  const auto meta = pgc::load_meta(meta_path);
  const auto samples = pgc::load_dataset(samples_path, meta);
  if (samples.empty()) throw pgc::DataError("samples file is empty: " + samples_path);
  const auto train_set = pgc::load_dataset(train_path, meta);
  const auto vt = valency_path.empty() ? pgc::ValencyTable::qm9_default()
                                       : pgc::ValencyTable::load(valency_path, meta);
  vt.validate(meta);
  const auto report = pgc::metrics_suite(samples, train_set, vt);
  json j;
  j["valid"] = report.valid_pct;
  j["unique"] = report.unique_pct;
  j["novel"] = report.novel_pct;
  j["samples"] = report.sample_count;
  j["fcd"] = "n/a";
  j["nspdk"] = "n/a";
  const auto text = j.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    pgc::atomic_write_text(out_path, text);
  }
  return 0;
}

int cmd_query(const std::string& model_path, const std::string& spec_arg) {
  const auto model = pgc::load_model(model_path);
  std::string spec_text = spec_arg;
  if (std::filesystem::exists(spec_arg)) {
    std::ifstream in(spec_arg);
    std::stringstream buffer;
    buffer << in.rdbuf();
    spec_text = buffer.str();
  }
  json spec_json;
  try {
    spec_json = json::parse(spec_text);
  } catch (const std::exception& e) {
    throw pgc::DataError(std::string("query spec is not valid JSON: ") + e.what());
  }
  const auto q = pgc::QuerySpec::from_json(spec_json, model.meta());
  json j;
  j["logp"] = model.query(q);
  std::cout << j.dump(2) << std::endl;
  return 0;
}

int cmd_anomaly(const std::string& model_path, const std::string& in_path,
                const std::string& ood_path, double frac, std::uint64_t seed,
                const std::string& out_path) {
  const auto model = pgc::load_model(model_path);
  const auto in_set = pgc::load_dataset(in_path, model.meta());
  const auto out_set = pgc::load_dataset(ood_path, model.meta());
  const auto result = pgc::anomaly_experiment(model, in_set, out_set, frac, seed);

  std::ostringstream csv;
  csv.precision(17);
  csv << "bin_lo,bin_hi,count_in,count_out\n";
  for (std::size_t b = 0; b < result.count_in.size(); ++b)
    csv << result.bin_edges[b] << ',' << result.bin_edges[b + 1] << ',' << result.count_in[b]
        << ',' << result.count_out[b] << '\n';
  if (!out_path.empty()) pgc::atomic_write_text(out_path, csv.str());

  json j;
  j["auc"] = result.auc;
  j["permute_frac"] = frac;
  j["in_count"] = result.scores_in.size();
  j["out_count"] = result.scores_out.size();
  if (!out_path.empty()) j["histogram"] = out_path;
  std::cout << j.dump(2) << std::endl;
  return 0;
}

int cmd_check(const std::string& config_path) {
  auto run = pgc::run_config_from(pgc::parse_config_file(config_path));
  if (run.meta.empty()) throw pgc::DataError("config: missing key 'meta'");
  run.model.meta = pgc::load_meta(run.meta);

  std::vector<pgc::GraphInstance> structure_data;
  if (!run.dataset.empty()) structure_data = pgc::load_dataset(run.dataset, run.model.meta);

  json j;
  j["enumeration_size"] = pgc::enumeration_size(run.model.meta);
  bool pass = true;
  double worst = 0.0;
  for (const auto mode : {pgc::Mode::SPgc, pgc::Mode::IPgc, pgc::Mode::NFactPgc}) {
    auto spec = run.model;
    spec.mode = mode;
    spec.ordering = pgc::OrderingKind::None;
    auto model = pgc::PgcModel::create(spec, &structure_data);
    const double mass = pgc::total_mass(model);
    j["total_mass"][pgc::mode_name(mode)] = mass;
    worst = std::max(worst, std::abs(mass - 1.0));
    pass &= std::abs(mass - 1.0) <= 1e-6;
  }
  {
    auto spec = run.model;
    spec.mode = pgc::Mode::PiPgc;
    if (spec.ordering == pgc::OrderingKind::None) spec.ordering = pgc::OrderingKind::Bft;
    auto model = pgc::PgcModel::create(spec, &structure_data);
    const double mass = pgc::total_mass(model);
    j["total_mass"][pgc::mode_name(spec.mode)] = mass;
    pass &= mass <= 1.0 + 1e-6;
  }

  // Spot-check single-pass queries against explicit summation.
  auto spec = run.model;
  spec.mode = pgc::Mode::SPgc;
  spec.ordering = pgc::OrderingKind::None;
  auto model = pgc::PgcModel::create(spec, &structure_data);
  pgc::Rng rng(pgc::derive_seed(run.model.seed, 7));
  double max_err = 0.0;
  const int trials = 32;
  for (int t = 0; t < trials; ++t) {
    const int n = 1 + static_cast<int>(rng.uniform_int(run.model.meta.m));
    auto q = pgc::QuerySpec::all_marginalized(run.model.meta, n);
    for (int i = 0; i < n; ++i)
      if (rng.uniform01() < 0.5)
        q.nodes[i] = static_cast<std::int32_t>(rng.uniform_int(run.model.meta.n_x));
    for (int i = 1; i < n; ++i)
      for (int jj = 0; jj < i; ++jj)
        if (rng.uniform01() < 0.5)
          q.edges[pgc::tri_index(i, jj)] =
              static_cast<std::int32_t>(rng.uniform_int(run.model.meta.n_a));
    max_err = std::max(max_err, std::abs(model.query(q) - pgc::oracle_query(model, q)));
  }
  j["query_trials"] = trials;
  j["query_max_abs_err"] = max_err;
  pass &= max_err <= 1e-6;

  j["pass"] = pass;
  std::cout << j.dump(2) << std::endl;
  if (!pass) throw pgc::NumericError("oracle check failed; see report");
  return 0;
}

int cmd_heatmap(const std::string& dataset_path, const std::string& meta_path,
                const std::string& ordering, std::uint64_t seed, const std::string& out_path) {
  const auto meta = pgc::load_meta(meta_path);
  const auto data = pgc::load_dataset(dataset_path, meta);
  const auto kind = pgc::parse_ordering(ordering);
  const auto heatmap = pgc::adjacency_heatmap(data, meta, kind, seed);
  pgc::write_heatmap_csv(out_path, heatmap, meta.m);
  json j;
  j["out"] = out_path;
  j["bandwidth_weighted_mean"] = pgc::bandwidth_weighted_mean(heatmap, meta.m);
  std::cout << j.dump(2) << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tractable generative modeling for attributed graphs"};
  app.require_subcommand(1);

  std::string config_path, model_path, scaffold_path, spec_arg, out_path;
  std::string samples_path, train_path, meta_path, valency_path, in_path, ood_path, dataset_path;
  std::string ordering = "bft";
  long count = 1;
  double frac = 0.2;
  std::uint64_t seed = 0;

  auto* train_cmd = app.add_subcommand("train", "Train a model from a config file");
  train_cmd->add_option("--config", config_path, "key = value config file")->required();

  auto* sample_cmd = app.add_subcommand("sample", "Draw graphs from a trained model");
  sample_cmd->add_option("--model", model_path)->required();
  sample_cmd->add_option("--count", count);
  sample_cmd->add_option("--seed", seed);
  sample_cmd->add_option("--scaffold", scaffold_path, "JSON-lines file; first record conditions the samples");
  sample_cmd->add_option("--out", out_path, "output JSON-lines path (default stdout)");

  auto* eval_cmd = app.add_subcommand("eval", "Generation metrics for a sample file");
  eval_cmd->add_option("--samples", samples_path)->required();
  eval_cmd->add_option("--train", train_path)->required();
  eval_cmd->add_option("--meta", meta_path)->required();
  eval_cmd->add_option("--valency", valency_path, "valency table JSON (default: C,N,O,F budget)");
  eval_cmd->add_option("--out", out_path);

  auto* query_cmd = app.add_subcommand("query", "Exact evidence/marginal query");
  query_cmd->add_option("--model", model_path)->required();
  query_cmd->add_option("--spec", spec_arg, "query JSON (inline or a file path)")->required();

  auto* anomaly_cmd = app.add_subcommand("anomaly", "Score in/out sets and report AUC");
  anomaly_cmd->add_option("--model", model_path)->required();
  anomaly_cmd->add_option("--in", in_path, "in-distribution JSON-lines")->required();
  anomaly_cmd->add_option("--ood", ood_path, "out-of-distribution JSON-lines")->required();
  anomaly_cmd->add_option("--frac", frac, "fraction of in-distribution items to re-permute");
  anomaly_cmd->add_option("--seed", seed);
  anomaly_cmd->add_option("--out", out_path, "histogram CSV path");

  auto* check_cmd = app.add_subcommand("check", "Brute-force certificates on a tiny meta");
  check_cmd->add_option("--config", config_path)->required();

  auto* heatmap_cmd = app.add_subcommand("heatmap", "Ordered mean adjacency as CSV");
  heatmap_cmd->add_option("--dataset", dataset_path)->required();
  heatmap_cmd->add_option("--meta", meta_path)->required();
  heatmap_cmd->add_option("--ordering", ordering, "random|bft|dft|rcm|none");
  heatmap_cmd->add_option("--seed", seed);
  heatmap_cmd->add_option("--out", out_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(config_path);
    if (sample_cmd->parsed()) return cmd_sample(model_path, count, seed, scaffold_path, out_path);
    if (eval_cmd->parsed()) return cmd_eval(samples_path, train_path, meta_path, valency_path, out_path);
    if (query_cmd->parsed()) return cmd_query(model_path, spec_arg);
    if (anomaly_cmd->parsed()) return cmd_anomaly(model_path, in_path, ood_path, frac, seed, out_path);
    if (check_cmd->parsed()) return cmd_check(config_path);
    if (heatmap_cmd->parsed()) return cmd_heatmap(dataset_path, meta_path, ordering, seed, out_path);
  } catch (const pgc::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 4;
  } catch (const pgc::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
