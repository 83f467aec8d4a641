#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dbr/image.hpp"
#include "dbr/losses.hpp"
#include "dbr/pipeline.hpp"
#include "dbr/predictor.hpp"

namespace dbr {

struct OptimizerConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Decoupled: theta <- theta - lr * weight_decay * theta before the Adam delta.
  double weight_decay = 1e-8;

  void validate() const;
};

struct TrainConfig {
  OptimizerConfig optim;
  std::size_t batch_size = 4;
  std::size_t epochs = 10;
  /// Stop after this many optimizer steps (0 = no cap).
  std::size_t max_iterations = 0;
  /// Invoke the checkpoint callback every k epochs (0 = only at the end).
  std::size_t checkpoint_every = 0;
  std::uint64_t seed = 0;
  AugmentConfig augment;
  LossConfig loss;
  PipelineConfig pipeline;
  PredictorConfig predictor;

  void validate() const;
};

struct AdamState {
  std::size_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One bias-corrected Adam update of `params` in place. `grads[i]` must match
/// `params[i]` in size.
void adam_step(std::vector<Tensor>& params, const std::vector<std::vector<double>>& grads, AdamState& state,
               const OptimizerConfig& cfg);

struct TrainRecord {
  std::size_t iteration = 0;
  LossBreakdown loss;
};

struct TrainResult {
  PredictorParams params;
  std::vector<TrainRecord> history;
};

using CheckpointCallback = std::function<void(std::size_t epoch, const PredictorParams& params)>;

/// Deterministic given (dataset, cfg). An epoch draws one random patch per
/// pair in shuffled order; each group of batch_size patches is one step.
/// Parameters are stored at 32-bit precision after every step so that a
/// saved checkpoint reproduces the in-memory model exactly.
TrainResult train(const PairedDataset& dataset, const TrainConfig& cfg, const CheckpointCallback& on_checkpoint = {});

/// Loss of `params` on full images, averaged over the dataset.
LossBreakdown dataset_loss(const PairedDataset& dataset, const PredictorParams& params, const TrainConfig& cfg);

/// Rounds every parameter to the nearest float.
void round_to_f32(PredictorParams& params);

/// `iter,total,l_r,l_n,l_e`, one line per record.
std::string loss_history_csv(const std::vector<TrainRecord>& history);

// --- checkpoint file ---
// "DBRC", u32 version, u32 count, count x (u32 name length, name, u32 rank,
// u32 dims[rank], f32 values), u32 config length, config text. Little-endian.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct CheckpointFile {
  std::uint32_t version = kCheckpointVersion;
  std::vector<CheckpointEntry> entries;
  std::string config_text;
};

void write_checkpoint_file(const CheckpointFile& file, const std::filesystem::path& path);
CheckpointFile read_checkpoint_file(const std::filesystem::path& path);

/// Parameters plus the full configuration snapshot.
void save_checkpoint(const PredictorParams& params, const TrainConfig& cfg, const std::filesystem::path& path);

struct LoadedModel {
  TrainConfig config;
  PredictorParams params;
};
LoadedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace dbr
