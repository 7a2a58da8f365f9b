#include "pgc/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "pgc/rng.hpp"

namespace pgc {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap map;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("config line " + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw DataError("config line " + std::to_string(line_no) + ": empty key or value");
    if (map.contains(key))
      throw DataError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    map[key] = value;
  }
  return map;
}

ConfigMap parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

RunConfig run_config_from(const ConfigMap& map) {
  static const std::set<std::string> known = {
      "mode",          "ordering",      "rg_node",   "rg_edge",   "n_layers_node",
      "n_layers_edge", "n_s",           "n_i",       "n_r",       "n_c",
      "alpha",         "beta1",         "beta2",     "epsilon",   "batch_size",
      "epochs",        "seed",          "dataset",   "meta",      "out_dir",
      "smoothing",     "factorial_cap",
  };
  for (const auto& [key, value] : map)
    if (!known.contains(key)) throw DataError("config: unknown key '" + key + "'");

  auto get = [&map](const std::string& key, const std::string& fallback) {
    const auto it = map.find(key);
    return it == map.end() ? fallback : it->second;
  };
  auto get_int = [&map](const std::string& key, int fallback) {
    const auto it = map.find(key);
    return it == map.end() ? fallback : std::stoi(it->second);
  };
  auto get_double = [&map](const std::string& key, double fallback) {
    const auto it = map.find(key);
    return it == map.end() ? fallback : std::stod(it->second);
  };

  RunConfig run;
  run.dataset = get("dataset", "");
  run.meta = get("meta", "");
  run.out_dir = get("out_dir", "");

  auto& model = run.model;
  model.mode = parse_mode(get("mode", "spgc"));
  model.ordering = parse_ordering(get("ordering", model.mode == Mode::PiPgc ? "bft" : "none"));
  model.sum_units = get_int("n_s", 8);
  model.input_units = get_int("n_i", 8);
  model.coupling_units = get_int("n_c", 4);
  model.factorial_cap = get_int("factorial_cap", 6);
  model.seed = static_cast<std::uint64_t>(std::stoull(get("seed", "0")));

  model.rg_node.kind = parse_region_graph_kind(get("rg_node", "bt"));
  model.rg_edge.kind = parse_region_graph_kind(get("rg_edge", "bt"));
  model.rg_node.n_layers = get_int("n_layers_node", 2);
  model.rg_edge.n_layers = get_int("n_layers_edge", 3);
  const int n_r = get_int("n_r", 4);
  model.rg_node.n_repetitions = n_r;
  model.rg_edge.n_repetitions = n_r;
  const double smoothing = get_double("smoothing", 0.1);
  model.rg_node.smoothing = smoothing;
  model.rg_edge.smoothing = smoothing;
  model.rg_node.seed = derive_seed(model.seed, 101);
  model.rg_edge.seed = derive_seed(model.seed, 102);
  if (model.rg_node.kind == RegionGraphKind::RtSync) model.rg_edge.seed = model.rg_node.seed;

  auto& train = run.train;
  train.step_size = get_double("alpha", 0.05);
  train.beta1 = get_double("beta1", 0.9);
  train.beta2 = get_double("beta2", 0.82);
  train.epsilon = get_double("epsilon", 1e-8);
  train.batch_size = get_int("batch_size", 256);
  train.epochs = get_int("epochs", 40);
  train.seed = derive_seed(model.seed, 103);
  train.validate();
  return run;
}

void atomic_write_text(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << content;
    if (!out) throw DataError("write failed: " + path);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace pgc
