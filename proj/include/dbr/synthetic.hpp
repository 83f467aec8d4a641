#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "dbr/image.hpp"

namespace dbr {

/// Procedural low/normal-light pairs. The reference is a random scene of
/// shaded shapes and texture. The low image is gain * ref^gamma plus
/// signal-dependent and read noise. Both are quantized to 8 bits, so a
/// written-then-loaded dataset equals the in-memory one.
struct SynthConfig {
  std::size_t count = 8;
  std::size_t height = 96;
  std::size_t width = 96;
  std::uint64_t seed = 1;
  double gain_min = 0.08;
  double gain_max = 0.2;
  double gamma_min = 1.0;
  double gamma_max = 1.4;
  double shot_noise = 0.002;
  double read_noise = 0.004;

  void validate() const;
};

PairedDataset make_synthetic_dataset(const SynthConfig& cfg);

/// Writes `<root>/low/<id>.png` and `<root>/high/<id>.png`.
void write_dataset(const PairedDataset& dataset, const std::filesystem::path& root);

}  // namespace dbr
