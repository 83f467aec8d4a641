#include "dbr/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "dbr/config.hpp"
#include "dbr/errors.hpp"
#include "dbr/ops.hpp"

namespace dbr {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void OptimizerConfig::validate() const {
  if (!(lr >= 0.0)) throw UsageError("optimizer: lr must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw UsageError("optimizer: beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw UsageError("optimizer: beta2 must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw UsageError("optimizer: adam_eps must be > 0");
  if (!(weight_decay >= 0.0)) throw UsageError("optimizer: weight_decay must be >= 0");
}

void TrainConfig::validate() const {
  optim.validate();
  if (batch_size == 0) throw UsageError("train: batch_size must be >= 1");
  if (epochs == 0 && max_iterations == 0) throw UsageError("train: epochs must be >= 1");
  augment.validate();
  loss.validate();
  pipeline.validate();
  predictor.validate();
}

void adam_step(std::vector<Tensor>& params, const std::vector<std::vector<double>>& grads, AdamState& state,
               const OptimizerConfig& cfg) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("adam_step: " + std::to_string(params.size()) + " parameters but " +
                                std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.numel(), 0.0);
      state.v.emplace_back(p.numel(), 0.0);
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() != params[i].numel() || state.m[i].size() != params[i].numel()) {
      throw std::invalid_argument("adam_step: size mismatch for parameter " + std::to_string(i) + " " +
                                  shape_str(params[i].shape()));
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].mutable_values();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto& g = grads[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= cfg.lr * cfg.weight_decay * w[j];
      w[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
}

void round_to_f32(PredictorParams& params) {
  for (auto& [name, t] : params.tensors) {
    for (auto& v : t.mutable_values()) v = static_cast<double>(static_cast<float>(v));
  }
}

namespace {

LossTerms sample_loss(const ImageF32& low, const ImageF32& ref, const PredictorParams& params,
                      const TrainConfig& cfg) {
  const Tensor img = to_tensor(low);
  const Tensor target = to_tensor(ref);
  const auto d = decompose(img, params, cfg.pipeline);
  return total_loss(d.reflectance, target, d.noise, d.illumination, img, cfg.loss);
}

bool finite(const LossBreakdown& b) {
  return std::isfinite(b.total) && std::isfinite(b.l_r) && std::isfinite(b.l_n) && std::isfinite(b.l_e);
}

}  // namespace

TrainResult train(const PairedDataset& dataset, const TrainConfig& cfg, const CheckpointCallback& on_checkpoint) {
  cfg.validate();
  if (dataset.pairs.empty()) throw DataError("train: dataset is empty");

  TrainResult result;
  result.params = init_params(cfg.predictor, layout_for(cfg.pipeline).channels(), cfg.seed);
  round_to_f32(result.params);

  std::seed_seq seq{cfg.seed, std::uint64_t{0x5eed}};
  std::mt19937_64 rng(seq);
  AdamState state;
  std::vector<Tensor> leaves;
  for (auto& [name, t] : result.params.tensors) leaves.push_back(t);

  const std::size_t n = dataset.pairs.size();
  std::vector<std::size_t> order(n);
  std::size_t iteration = 0;
  const std::size_t epochs = cfg.epochs == 0 ? SIZE_MAX : cfg.epochs;
  bool done = false;
  for (std::size_t epoch = 1; epoch <= epochs && !done; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n && !done; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const double inv_b = 1.0 / static_cast<double>(stop - start);
      result.params.zero_grad();
      LossBreakdown mean;
      for (std::size_t k = start; k < stop; ++k) {
        const auto [low, ref] = sample_patch(dataset.pairs[order[k]], cfg.augment, rng);
        const LossTerms terms = sample_loss(low, ref, result.params, cfg);
        const LossBreakdown b = terms.values();
        if (!finite(b)) {
          throw NumericError("train: non-finite loss at iteration " + std::to_string(iteration + 1) + " on pair '" +
                             dataset.pairs[order[k]].id + "' (total=" + std::to_string(b.total) + ")");
        }
        mean.total += b.total * inv_b;
        mean.l_r += b.l_r * inv_b;
        mean.l_n += b.l_n * inv_b;
        mean.l_e += b.l_e * inv_b;
        scale(terms.total, inv_b).backward();
      }

      std::vector<std::vector<double>> grads;
      for (const auto& t : leaves) {
        if (t.has_grad()) {
          grads.emplace_back(t.grad().begin(), t.grad().end());
        } else {
          grads.emplace_back(t.numel(), 0.0);
        }
        for (double g : grads.back()) {
          if (!std::isfinite(g)) throw NumericError("train: non-finite gradient at iteration " + std::to_string(iteration + 1));
        }
      }
      adam_step(leaves, grads, state, cfg.optim);
      round_to_f32(result.params);
      for (const auto& t : leaves) {
        for (double v : t.values()) {
          if (!std::isfinite(v)) throw NumericError("train: non-finite parameter at iteration " + std::to_string(iteration + 1));
        }
      }

      ++iteration;
      result.history.push_back({iteration, mean});
      if (cfg.max_iterations != 0 && iteration >= cfg.max_iterations) done = true;
    }
    if (on_checkpoint && cfg.checkpoint_every != 0 && epoch % cfg.checkpoint_every == 0 && !done) {
      on_checkpoint(epoch, result.params);
    }
  }
  result.params.zero_grad();
  return result;
}

LossBreakdown dataset_loss(const PairedDataset& dataset, const PredictorParams& params, const TrainConfig& cfg) {
  if (dataset.pairs.empty()) throw DataError("dataset_loss: dataset is empty");
  LossBreakdown mean;
  const double inv = 1.0 / static_cast<double>(dataset.pairs.size());
  for (const auto& pair : dataset.pairs) {
    const LossBreakdown b = sample_loss(pair.low, pair.reference, params, cfg).values();
    mean.total += b.total * inv;
    mean.l_r += b.l_r * inv;
    mean.l_n += b.l_n * inv;
    mean.l_e += b.l_e * inv;
  }
  return mean;
}

std::string loss_history_csv(const std::vector<TrainRecord>& history) {
  std::string out = "iter,total,l_r,l_n,l_e\n";
  char buf[160];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g\n", r.iteration, r.loss.total, r.loss.l_r, r.loss.l_n,
                  r.loss.l_e);
    out += buf;
  }
  return out;
}

// --- checkpoint I/O ---

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

class Reader {
 public:
  Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

  const char* take(std::size_t n, const char* what) {
    if (data_.size() - pos_ < n) {
      throw CheckpointError("checkpoint " + path_ + ": truncated at offset " + std::to_string(pos_) + " reading " +
                            what + " (need " + std::to_string(n) + " bytes, " + std::to_string(data_.size() - pos_) +
                            " left)");
    }
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint32_t u32(const char* what) {
    std::uint32_t v;
    std::memcpy(&v, take(4, what), 4);
    return v;
  }
  std::size_t pos() const { return pos_; }
  std::size_t size() const { return data_.size(); }

 private:
  std::string data_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_checkpoint_file(const CheckpointFile& file, const std::filesystem::path& path) {
  std::string out = "DBRC";
  put_u32(out, file.version);
  put_u32(out, static_cast<std::uint32_t>(file.entries.size()));
  for (const auto& e : file.entries) {
    if (e.values.size() != shape_numel(e.shape)) {
      throw std::invalid_argument("write_checkpoint_file: entry '" + e.name + "' size does not match its shape");
    }
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    put_u32(out, static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) put_u32(out, static_cast<std::uint32_t>(d));
    out.append(reinterpret_cast<const char*>(e.values.data()), e.values.size() * sizeof(float));
  }
  put_u32(out, static_cast<std::uint32_t>(file.config_text.size()));
  out += file.config_text;

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError("checkpoint: cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw CheckpointError("checkpoint: write failed for " + path.string());
}

CheckpointFile read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("checkpoint: cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  Reader r(ss.str(), path.string());

  if (std::memcmp(r.take(4, "magic"), "DBRC", 4) != 0) {
    throw CheckpointError("checkpoint " + path.string() + ": bad magic (not a DBRC file)");
  }
  CheckpointFile file;
  file.version = r.u32("version");
  if (file.version != kCheckpointVersion) {
    throw CheckpointError("checkpoint " + path.string() + ": unsupported version " + std::to_string(file.version) +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t count = r.u32("entry count");
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    const std::uint32_t len = r.u32("name length");
    e.name.assign(r.take(len, "name"), len);
    const std::uint32_t rank = r.u32("rank");
    if (rank > 8) throw CheckpointError("checkpoint " + path.string() + ": implausible rank " + std::to_string(rank));
    for (std::uint32_t k = 0; k < rank; ++k) e.shape.push_back(r.u32("dims"));
    const std::size_t n = shape_numel(e.shape);
    if (n > r.size()) {
      throw CheckpointError("checkpoint " + path.string() + ": truncated at offset " + std::to_string(r.pos()) +
                            " reading values of '" + e.name + "'");
    }
    e.values.resize(n);
    std::memcpy(e.values.data(), r.take(n * sizeof(float), "values"), n * sizeof(float));
    file.entries.push_back(std::move(e));
  }
  const std::uint32_t clen = r.u32("config length");
  file.config_text.assign(r.take(clen, "config text"), clen);
  if (r.pos() != r.size()) {
    throw CheckpointError("checkpoint " + path.string() + ": " + std::to_string(r.size() - r.pos()) +
                          " trailing bytes at offset " + std::to_string(r.pos()));
  }
  return file;
}

void save_checkpoint(const PredictorParams& params, const TrainConfig& cfg, const std::filesystem::path& path) {
  CheckpointFile file;
  for (const auto& [name, t] : params.tensors) {
    CheckpointEntry e{name, t.shape(), {}};
    e.values.reserve(t.numel());
    for (double v : t.values()) e.values.push_back(static_cast<float>(v));
    file.entries.push_back(std::move(e));
  }
  file.config_text = serialize_config(cfg);
  write_checkpoint_file(file, path);
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
  const CheckpointFile file = read_checkpoint_file(path);
  LoadedModel model;
  try {
    model.config = parse_config(file.config_text);
  } catch (const UsageError& e) {
    throw CheckpointError("checkpoint " + path.string() + ": bad config snapshot: " + e.what());
  }
  const std::size_t channels = layout_for(model.config.pipeline).channels();
  model.params = zero_params(model.config.predictor, channels);
  const auto expected = parameter_shapes(model.config.predictor, channels);
  if (expected.size() != file.entries.size()) {
    throw CheckpointError("checkpoint " + path.string() + ": " + std::to_string(file.entries.size()) +
                          " tensors, configuration expects " + std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& e = file.entries[i];
    if (e.name != expected[i].first || e.shape != expected[i].second) {
      throw CheckpointError("checkpoint " + path.string() + ": tensor " + std::to_string(i) + " is '" + e.name + "' " +
                            shape_str(e.shape) + ", expected '" + expected[i].first + "' " +
                            shape_str(expected[i].second));
    }
    auto dst = model.params.get(e.name).mutable_values();
    for (std::size_t k = 0; k < e.values.size(); ++k) dst[k] = e.values[k];
  }
  return model;
}

}  // namespace dbr
