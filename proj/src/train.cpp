#include "pgc/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "pgc/logmath.hpp"
#include "pgc/rng.hpp"

namespace pgc {

void TrainConfig::validate() const {
  if (!(step_size > 0)) throw DataError("train: step size must be > 0");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
    throw DataError("train: decay rates must lie in [0, 1)");
  if (epsilon <= 0) throw DataError("train: epsilon must be > 0");
  if (batch_size < 1) throw DataError("train: batch size must be >= 1");
  if (epochs < 1) throw DataError("train: epochs must be >= 1");
}

double nll(const PgcModel& model, std::span<const GraphInstance> batch, std::span<double> grad) {
  if (batch.empty()) throw DataError("nll: empty batch");
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  if (grad.empty()) {
    for (const auto& g : batch) total += model.logp(g);
    return -scale * total;
  }
  if (grad.size() != model.num_params()) throw DataError("nll: gradient buffer size mismatch");
  std::vector<double> instance_grad(grad.size());
  for (const auto& g : batch) {
    std::fill(instance_grad.begin(), instance_grad.end(), 0.0);
    total += model.logp_with_grad(g, instance_grad);
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] -= scale * instance_grad[i];
  }
  const double value = -scale * total;
  if (!std::isfinite(value)) throw NumericError("nll: non-finite objective");
  return value;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const TrainConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw DataError("adam_step: size mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= cfg.step_size * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

TrainResult train(PgcModel& model, std::span<const GraphInstance> train_set,
                  std::span<const GraphInstance> valid_set, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty()) throw DataError("train: empty training set");

  const std::size_t n_params = model.num_params();
  std::vector<double> params(n_params), grad(n_params), best_params(n_params);
  model.get_params(params);
  best_params = params;
  AdamState state(n_params);

  auto valid_nll = [&]() {
    return valid_set.empty() ? nll(model, train_set) : nll(model, valid_set);
  };

  TrainResult result;
  result.best_valid_nll = valid_nll();
  result.best_epoch = 0;

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<GraphInstance> batch;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    double epoch_nll = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      batch.assign(stop - start, {});
      for (std::size_t i = start; i < stop; ++i) batch[i - start] = train_set[order[i]];
      std::fill(grad.begin(), grad.end(), 0.0);
      epoch_nll += nll(model, batch, grad);
      ++batches;
      model.get_params(params);
      adam_step(params, grad, state, cfg);
      model.set_params(params);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_nll = epoch_nll / static_cast<double>(batches);
    stats.valid_nll = valid_nll();
    result.trace.push_back(stats);
    if (stats.valid_nll < result.best_valid_nll) {
      result.best_valid_nll = stats.valid_nll;
      result.best_epoch = epoch;
      model.get_params(best_params);
    }
  }
  model.set_params(best_params);
  return result;
}

void write_trace_csv(const std::string& path, std::span<const EpochStats> trace) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw DataError("cannot write trace file: " + path);
    out << "epoch,train_nll,valid_nll\n";
    out.precision(17);
    for (const auto& s : trace) out << s.epoch << ',' << s.train_nll << ',' << s.valid_nll << '\n';
  }
  std::filesystem::rename(tmp, path);
}

namespace {

constexpr char kMagic[4] = {'P', 'G', 'C', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) throw DataError("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void save_model(const PgcModel& model, const std::string& path) {
  nlohmann::json header = model.structure_to_json();
  header["format_version"] = 1;
  header["param_count"] = model.num_params();
  const std::string header_bytes = header.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kMagic, 4);
    write_u32(out, static_cast<std::uint32_t>(header_bytes.size()));
    out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
    std::vector<double> params(model.num_params());
    model.get_params(params);
    out.write(reinterpret_cast<const char*>(params.data()),
              static_cast<std::streamsize>(params.size() * sizeof(double)));
    if (!out) throw DataError("checkpoint write failed: " + path);
  }
  std::filesystem::rename(tmp, path);
}

PgcModel load_model(const std::string& path, const DatasetMeta* expected_meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("checkpoint: bad magic; not a PGC1 file: " + path);
  const std::uint32_t header_len = read_u32(in);
  std::string header_bytes(header_len, '\0');
  in.read(header_bytes.data(), header_len);
  if (!in) throw DataError("checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_bytes);
  } catch (const std::exception& e) {
    throw DataError(std::string("checkpoint: corrupt header: ") + e.what());
  }
  if (header.at("format_version").get<int>() != 1)
    throw DataError("checkpoint: unsupported format version");

  PgcModel model = PgcModel::from_structure_json(header);
  if (expected_meta != nullptr) {
    const auto& meta = model.meta();
    if (meta.m != expected_meta->m || meta.n_x != expected_meta->n_x ||
        meta.n_a != expected_meta->n_a)
      throw DataError("checkpoint: dataset dimensions (m, n_x, n_a) do not match the expected meta");
  }
  const auto expected = header.at("param_count").get<std::size_t>();
  if (expected != model.num_params())
    throw DataError("checkpoint: parameter count does not match the stored structure");
  std::vector<double> params(expected);
  in.read(reinterpret_cast<char*>(params.data()),
          static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (!in) throw DataError("checkpoint: truncated parameter block");
  model.set_params(params);
  return model;
}

}  // namespace pgc
