#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pgc/model.hpp"

namespace pgc {

struct TrainConfig {
  double step_size = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.82;
  double epsilon = 1e-8;
  int batch_size = 256;
  int epochs = 40;
  std::uint64_t seed = 0;

  void validate() const;
};

// Mean negative log-likelihood over a batch; optionally accumulates the
// mean NLL gradient (same packing as PgcModel::get_params) into grad.
double nll(const PgcModel& model, std::span<const GraphInstance> batch,
           std::span<double> grad = {});

// First-moment/second-moment adaptive step with bias correction.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;

  explicit AdamState(std::size_t size) : m(size, 0.0), v(size, 0.0) {}
};

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const TrainConfig& cfg);

struct EpochStats {
  int epoch = 0;
  double train_nll = 0.0;
  double valid_nll = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> trace;
  double best_valid_nll = 0.0;
  int best_epoch = -1;
};

// Minibatch NLL descent with per-epoch reshuffling; the model is left at
// the checkpoint with the lowest validation NLL (initialization included).
TrainResult train(PgcModel& model, std::span<const GraphInstance> train_set,
                  std::span<const GraphInstance> valid_set, const TrainConfig& cfg);

void write_trace_csv(const std::string& path, std::span<const EpochStats> trace);

// Versioned checkpoint: magic "PGC1", little-endian u32 header length, a
// JSON structure header, then raw f64 parameter blocks in packing order.
void save_model(const PgcModel& model, const std::string& path);
PgcModel load_model(const std::string& path, const DatasetMeta* expected_meta = nullptr);

}  // namespace pgc
