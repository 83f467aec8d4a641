#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dbr/tensor.hpp"

namespace dbr {

/// H x W x C image, row-major with interleaved channels, values nominally in
/// [0, 1].
struct ImageF32 {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<float> data;

  static ImageF32 zeros(std::size_t h, std::size_t w, std::size_t c);

  float& at(std::size_t y, std::size_t x, std::size_t c) { return data[(y * width + x) * channels + c]; }
  float at(std::size_t y, std::size_t x, std::size_t c) const { return data[(y * width + x) * channels + c]; }
  bool same_dims(const ImageF32& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

/// Reads an 8-bit grayscale or RGB PNG. Grayscale is replicated to three
/// channels. Values are raw / 255.
ImageF32 load_image(const std::filesystem::path& path);

/// Writes a 1- or 3-channel image as 8-bit PNG: clamp to [0, 1], then
/// round half up.
void save_image(const ImageF32& img, const std::filesystem::path& path);

/// clamp-to-[0,1] then floor(v * 255 + 0.5).
std::uint8_t quantize_u8(float v);

struct ImagePair {
  ImageF32 low;
  ImageF32 reference;
  std::string id;
};

struct PairedDataset {
  std::vector<ImagePair> pairs;
  /// Filenames present on only one side.
  std::vector<std::string> skipped;
};

/// Pairs PNGs by identical filename, sorted by filename.
PairedDataset load_paired_dataset(const std::filesystem::path& low_dir, const std::filesystem::path& ref_dir);

/// `<root>/low` and `<root>/high`.
PairedDataset load_dataset_root(const std::filesystem::path& root);

struct AugmentConfig {
  std::size_t patch_size = 64;
  bool mirror = true;
  bool rotate = true;
  double resize_min = 0.75;
  double resize_max = 1.25;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One concrete geometric draw, applied identically to both images of a pair.
struct AugmentDraw {
  std::size_t crop_y = 0;
  std::size_t crop_x = 0;
  std::size_t crop_size = 0;
  bool flip = false;
  int quarter_turns = 0;
};

AugmentDraw draw_augment(std::size_t height, std::size_t width, const AugmentConfig& cfg, std::mt19937_64& rng);
ImageF32 apply_augment(const ImageF32& img, const AugmentDraw& draw, std::size_t patch_size);

/// Crop, rescale, mirror and rotate (multiples of 90 degrees) both images
/// with one shared draw.
std::pair<ImageF32, ImageF32> sample_patch(const ImagePair& pair, const AugmentConfig& cfg, std::mt19937_64& rng);

ImageF32 crop(const ImageF32& img, std::size_t y, std::size_t x, std::size_t h, std::size_t w);
ImageF32 flip_horizontal(const ImageF32& img);
/// Counter-clockwise rotation by k quarter turns (k may be negative).
ImageF32 rotate90(const ImageF32& img, int k);
ImageF32 resize(const ImageF32& img, std::size_t h, std::size_t w);

Tensor to_tensor(const ImageF32& img, bool requires_grad = false);
ImageF32 from_tensor(const Tensor& t);

}  // namespace dbr
