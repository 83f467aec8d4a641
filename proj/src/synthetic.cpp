#include "dbr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "dbr/errors.hpp"

namespace dbr {

void SynthConfig::validate() const {
  if (count == 0) throw UsageError("synth: count must be >= 1");
  if (height < 2 || width < 2) throw UsageError("synth: image must be at least 2x2");
  if (!(gain_min > 0 && gain_min <= gain_max && gain_max <= 1)) throw UsageError("synth: need 0 < gain_min <= gain_max <= 1");
  if (!(gamma_min > 0 && gamma_min <= gamma_max)) throw UsageError("synth: need 0 < gamma_min <= gamma_max");
  if (shot_noise < 0 || read_noise < 0) throw UsageError("synth: noise levels must be >= 0");
}

namespace {

float q8(double v) { return static_cast<float>(quantize_u8(static_cast<float>(v))) / 255.0f; }

ImageF32 make_scene(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageF32 img = ImageF32::zeros(h, w, 3);

  double base[2][3];
  for (auto& corner : base) {
    for (double& c : corner) c = 0.2 + 0.6 * u(rng);
  }
  const double angle = 2.0 * std::numbers::pi * u(rng);
  const double freq = 0.05 + 0.25 * u(rng);
  const double amp = 0.05 + 0.1 * u(rng);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double t = (static_cast<double>(x) / static_cast<double>(w - 1) + static_cast<double>(y) / static_cast<double>(h - 1)) / 2.0;
      const double tex = amp * std::sin(freq * (std::cos(angle) * static_cast<double>(x) + std::sin(angle) * static_cast<double>(y)));
      for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>((1 - t) * base[0][c] + t * base[1][c] + tex);
    }
  }

  const int shapes = 4 + static_cast<int>(u(rng) * 5);
  for (int s = 0; s < shapes; ++s) {
    double color[3];
    for (double& c : color) c = 0.05 + 0.9 * u(rng);
    const double cy = u(rng) * static_cast<double>(h), cx = u(rng) * static_cast<double>(w);
    const double ry = (0.08 + 0.25 * u(rng)) * static_cast<double>(h);
    const double rx = (0.08 + 0.25 * u(rng)) * static_cast<double>(w);
    const bool disc = u(rng) < 0.5;
    const double shade = 0.3 * (u(rng) - 0.5);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double dy = (static_cast<double>(y) - cy) / ry, dx = (static_cast<double>(x) - cx) / rx;
        const bool inside = disc ? dy * dy + dx * dx <= 1.0 : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
        if (!inside) continue;
        for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>(color[c] + shade * dy);
      }
    }
  }
  for (auto& v : img.data) v = q8(v);
  return img;
}

}  // namespace

PairedDataset make_synthetic_dataset(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  PairedDataset ds;
  for (std::size_t i = 0; i < cfg.count; ++i) {
    ImagePair pair;
    char name[32];
    std::snprintf(name, sizeof name, "pair_%03zu", i);
    pair.id = name;
    pair.reference = make_scene(cfg.height, cfg.width, rng);
    const double gain = cfg.gain_min + (cfg.gain_max - cfg.gain_min) * u(rng);
    const double gamma = cfg.gamma_min + (cfg.gamma_max - cfg.gamma_min) * u(rng);
    pair.low = pair.reference;
    for (auto& v : pair.low.data) {
      const double clean = gain * std::pow(static_cast<double>(v), gamma);
      const double sd = std::sqrt(cfg.shot_noise * clean + cfg.read_noise * cfg.read_noise);
      v = q8(clean + sd * gauss(rng));
    }
    ds.pairs.push_back(std::move(pair));
  }
  return ds;
}

void write_dataset(const PairedDataset& dataset, const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(root / "low", ec);
  fs::create_directories(root / "high", ec);
  if (ec) throw DataError("write_dataset: cannot create " + root.string() + ": " + ec.message());
  for (const auto& p : dataset.pairs) {
    save_image(p.low, root / "low" / (p.id + ".png"));
    save_image(p.reference, root / "high" / (p.id + ".png"));
  }
}

}  // namespace dbr
