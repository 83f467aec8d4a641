#include "dbr/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <map>
#include <memory>
#include <set>

#include "dbr/errors.hpp"
#include "dbr/ops.hpp"
#include "dbr/parallel.hpp"

namespace fs = std::filesystem;

namespace dbr {

ImageF32 ImageF32::zeros(std::size_t h, std::size_t w, std::size_t c) {
  ImageF32 img;
  img.height = h;
  img.width = w;
  img.channels = c;
  img.data.assign(h * w * c, 0.0f);
  return img;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void png_error_to_exception(png_structp png, png_const_charp msg) {
  auto* buf = static_cast<std::string*>(png_get_error_ptr(png));
  if (buf) *buf = msg;
  png_longjmp(png, 1);
}

void png_warning_ignore(png_structp, png_const_charp) {}

}  // namespace

ImageF32 load_image(const fs::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw DataError("load_image: cannot open " + path.string());
  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    throw DataError("load_image: not a PNG file: " + path.string());
  }

  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_error_to_exception, png_warning_ignore);
  if (!png) throw DataError("load_image: libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("load_image: libpng init failed");
  }

  ImageF32 img;
  std::vector<png_byte> raw;
  std::vector<png_bytep> rows;
  std::string reject;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("load_image: decode error in " + path.string() + ": " + error);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  std::size_t src_channels = 0;
  if (depth != 8) {
    reject = "unsupported bit depth " + std::to_string(depth) + " (only 8-bit is accepted)";
  } else if (color == PNG_COLOR_TYPE_GRAY) {
    src_channels = 1;
  } else if (color == PNG_COLOR_TYPE_RGB) {
    src_channels = 3;
  } else {
    reject = "unsupported color type " + std::to_string(color) + " (only grayscale or RGB without alpha)";
  }
  if (reject.empty()) {
    const std::size_t stride = static_cast<std::size_t>(w) * src_channels;
    raw.resize(stride * h);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = raw.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (!reject.empty()) throw DataError("load_image: " + path.string() + ": " + reject);

  img = ImageF32::zeros(h, w, 3);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      const png_byte b = raw[p * src_channels + (src_channels == 1 ? 0 : c)];
      img.data[p * 3 + c] = static_cast<float>(static_cast<double>(b) / 255.0);
    }
  }
  return img;
}

std::uint8_t quantize_u8(float v) {
  const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
}

void save_image(const ImageF32& img, const fs::path& path) {
  if (img.channels != 1 && img.channels != 3) {
    throw std::invalid_argument("save_image: channels must be 1 or 3, got " + std::to_string(img.channels));
  }
  std::vector<png_byte> bytes(img.data.size());
  std::transform(img.data.begin(), img.data.end(), bytes.begin(), quantize_u8);
  png_image out{};
  out.version = PNG_IMAGE_VERSION;
  out.width = static_cast<png_uint_32>(img.width);
  out.height = static_cast<png_uint_32>(img.height);
  out.format = img.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&out, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    std::string msg = out.message;
    png_image_free(&out);
    throw DataError("save_image: cannot write " + path.string() + ": " + msg);
  }
}

namespace {

std::vector<std::string> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png") names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace

PairedDataset load_paired_dataset(const fs::path& low_dir, const fs::path& ref_dir) {
  const auto low = list_pngs(low_dir);
  const auto ref = list_pngs(ref_dir);
  const std::set<std::string> ref_set(ref.begin(), ref.end());
  const std::set<std::string> low_set(low.begin(), low.end());

  PairedDataset ds;
  std::vector<std::string> matched;
  for (const auto& n : low) {
    if (ref_set.count(n)) {
      matched.push_back(n);
    } else {
      ds.skipped.push_back(n);
    }
  }
  for (const auto& n : ref) {
    if (!low_set.count(n)) ds.skipped.push_back(n);
  }
  std::sort(ds.skipped.begin(), ds.skipped.end());
  if (matched.empty()) {
    throw DataError("load_paired_dataset: no filenames shared between " + low_dir.string() + " and " +
                    ref_dir.string());
  }

  ds.pairs.resize(matched.size());
  parallel_for(matched.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      auto& p = ds.pairs[i];
      p.id = fs::path(matched[i]).stem().string();
      p.low = load_image(low_dir / matched[i]);
      p.reference = load_image(ref_dir / matched[i]);
    }
  });
  for (const auto& p : ds.pairs) {
    if (!p.low.same_dims(p.reference)) {
      throw DataError("load_paired_dataset: size mismatch for pair " + p.id);
    }
  }
  return ds;
}

PairedDataset load_dataset_root(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("dataset root not found: " + root.string());
  return load_paired_dataset(root / "low", root / "high");
}

void AugmentConfig::validate() const {
  if (patch_size < 16 || patch_size % 2 != 0) {
    throw UsageError("augment: patch_size must be even and >= 16, got " + std::to_string(patch_size));
  }
  if (!(resize_min > 0.0) || resize_max < resize_min) {
    throw UsageError("augment: resize range must satisfy 0 < min <= max");
  }
}

AugmentDraw draw_augment(std::size_t height, std::size_t width, const AugmentConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const double min_side = static_cast<double>(std::min(height, width));
  const double patch = static_cast<double>(cfg.patch_size);
  if (patch > min_side * cfg.resize_max) {
    throw DataError("sample_patch: patch " + std::to_string(cfg.patch_size) + " larger than image " +
                    std::to_string(height) + "x" + std::to_string(width));
  }
  std::uniform_real_distribution<double> scale_dist(cfg.resize_min, cfg.resize_max);
  double s = cfg.resize_min == cfg.resize_max ? cfg.resize_min : scale_dist(rng);
  // Scales too small to fit a patch are raised to the smallest admissible one.
  s = std::max(s, patch / min_side);

  AugmentDraw d;
  d.crop_size = std::min(static_cast<std::size_t>(std::lround(patch / s)), std::min(height, width));
  std::uniform_int_distribution<std::size_t> ydist(0, height - d.crop_size);
  std::uniform_int_distribution<std::size_t> xdist(0, width - d.crop_size);
  d.crop_y = ydist(rng);
  d.crop_x = xdist(rng);
  if (cfg.mirror) d.flip = std::bernoulli_distribution(0.5)(rng);
  if (cfg.rotate) d.quarter_turns = std::uniform_int_distribution<int>(0, 3)(rng);
  return d;
}

ImageF32 apply_augment(const ImageF32& img, const AugmentDraw& draw, std::size_t patch_size) {
  ImageF32 out = crop(img, draw.crop_y, draw.crop_x, draw.crop_size, draw.crop_size);
  if (draw.crop_size != patch_size) out = resize(out, patch_size, patch_size);
  if (draw.flip) out = flip_horizontal(out);
  if (draw.quarter_turns != 0) out = rotate90(out, draw.quarter_turns);
  return out;
}

std::pair<ImageF32, ImageF32> sample_patch(const ImagePair& pair, const AugmentConfig& cfg, std::mt19937_64& rng) {
  if (!pair.low.same_dims(pair.reference)) throw DataError("sample_patch: pair dimensions differ");
  const AugmentDraw d = draw_augment(pair.low.height, pair.low.width, cfg, rng);
  return {apply_augment(pair.low, d, cfg.patch_size), apply_augment(pair.reference, d, cfg.patch_size)};
}

ImageF32 crop(const ImageF32& img, std::size_t y, std::size_t x, std::size_t h, std::size_t w) {
  if (y + h > img.height || x + w > img.width) throw std::out_of_range("crop: window outside image");
  ImageF32 out = ImageF32::zeros(h, w, img.channels);
  for (std::size_t i = 0; i < h; ++i) {
    const auto* src = img.data.data() + ((y + i) * img.width + x) * img.channels;
    std::copy_n(src, w * img.channels, out.data.data() + i * w * img.channels);
  }
  return out;
}

ImageF32 flip_horizontal(const ImageF32& img) {
  ImageF32 out = ImageF32::zeros(img.height, img.width, img.channels);
  for (std::size_t i = 0; i < img.height; ++i)
    for (std::size_t j = 0; j < img.width; ++j)
      for (std::size_t c = 0; c < img.channels; ++c) out.at(i, img.width - 1 - j, c) = img.at(i, j, c);
  return out;
}

ImageF32 rotate90(const ImageF32& img, int k) {
  k = ((k % 4) + 4) % 4;
  ImageF32 cur = img;
  for (int t = 0; t < k; ++t) {
    ImageF32 out = ImageF32::zeros(cur.width, cur.height, cur.channels);
    // Counter-clockwise: (i, j) -> (W-1-j, i).
    for (std::size_t i = 0; i < cur.height; ++i)
      for (std::size_t j = 0; j < cur.width; ++j)
        for (std::size_t c = 0; c < cur.channels; ++c) out.at(cur.width - 1 - j, i, c) = cur.at(i, j, c);
    cur = std::move(out);
  }
  return cur;
}

ImageF32 resize(const ImageF32& img, std::size_t h, std::size_t w) {
  return from_tensor(resize_bilinear(to_tensor(img), h, w));
}

Tensor to_tensor(const ImageF32& img, bool requires_grad) {
  std::vector<double> v(img.data.begin(), img.data.end());
  return Tensor::from_data({img.height, img.width, img.channels}, std::move(v), requires_grad);
}

ImageF32 from_tensor(const Tensor& t) {
  if (t.rank() != 3) throw std::invalid_argument("from_tensor: expected H x W x C, got " + shape_str(t.shape()));
  ImageF32 img = ImageF32::zeros(t.dim(0), t.dim(1), t.dim(2));
  const auto v = t.values();
  for (std::size_t i = 0; i < v.size(); ++i) img.data[i] = static_cast<float>(v[i]);
  return img;
}

}  // namespace dbr
