// dbr: train, apply and evaluate the bilateral Retinex enhancer.
//
// Exit codes: 0 success, 1 internal error, 2 usage, 3 data, 4 numeric,
// 5 checkpoint.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "dbr/config.hpp"
#include "dbr/errors.hpp"
#include "dbr/image.hpp"
#include "dbr/metrics.hpp"
#include "dbr/pipeline.hpp"
#include "dbr/selftest.hpp"
#include "dbr/synthetic.hpp"
#include "dbr/trainer.hpp"

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw dbr::DataError("cannot write " + path.string());
  f << text;
  if (!f) throw dbr::DataError("write failed for " + path.string());
}

int cmd_train(const fs::path& config, const fs::path& data, const fs::path& out, const fs::path& log) {
  const dbr::TrainConfig cfg = config.empty() ? dbr::TrainConfig{} : dbr::load_config(config);
  const dbr::PairedDataset ds = dbr::load_dataset_root(data);
  for (const auto& s : ds.skipped) std::cerr << "warning: no partner for " << s << ", skipped\n";
  std::cout << "training on " << ds.pairs.size() << " pairs\n";

  const auto result = dbr::train(ds, cfg, [&](std::size_t epoch, const dbr::PredictorParams& p) {
    dbr::save_checkpoint(p, cfg, out);
    std::cout << "epoch " << epoch << ": checkpoint written to " << out.string() << "\n";
  });
  dbr::save_checkpoint(result.params, cfg, out);
  if (!log.empty()) write_text(log, dbr::loss_history_csv(result.history));
  if (!result.history.empty()) {
    const auto& first = result.history.front().loss;
    const auto& last = result.history.back().loss;
    std::printf("iterations=%zu first_total=%.6f final_total=%.6f\n", result.history.size(), first.total, last.total);
  }
  std::cout << "checkpoint: " << out.string() << "\n";
  return 0;
}

std::vector<fs::path> list_inputs(const fs::path& input) {
  if (fs::is_regular_file(input)) return {input};
  if (!fs::is_directory(input)) throw dbr::DataError("input not found: " + input.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(input)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    return a.filename().string() < b.filename().string();
  });
  if (files.empty()) throw dbr::DataError("no PNG files in " + input.string());
  return files;
}

int cmd_enhance(const fs::path& ckpt, const fs::path& input, const fs::path& output, bool dump) {
  const dbr::LoadedModel model = dbr::load_checkpoint(ckpt);
  const auto files = list_inputs(input);
  std::error_code ec;
  fs::create_directories(output, ec);
  if (ec) throw dbr::DataError("cannot create " + output.string() + ": " + ec.message());
  for (const auto& f : files) {
    const dbr::ImageF32 img = dbr::load_image(f);
    const std::string stem = f.stem().string();
    const auto d = dbr::decompose(img, model.params, model.config.pipeline);
    dbr::ImageF32 r = d.reflectance;
    if (model.config.pipeline.clamp_output) {
      for (auto& v : r.data) v = std::clamp(v, 0.0f, 1.0f);
    }
    dbr::save_image(r, output / (stem + "_enhanced.png"));
    if (dump) dbr::dump_decomposition(d, output, stem);
    std::cout << f.filename().string() << " -> " << (output / (stem + "_enhanced.png")).string() << "\n";
  }
  return 0;
}

int cmd_eval(const fs::path& ckpt, const fs::path& pairs, const std::string& metrics, const fs::path& out) {
  const auto list = dbr::parse_metric_list(metrics);
  const dbr::LoadedModel model = dbr::load_checkpoint(ckpt);
  const dbr::PairedDataset ds = dbr::load_dataset_root(pairs);
  for (const auto& s : ds.skipped) std::cerr << "warning: no partner for " << s << ", skipped\n";
  const auto report = dbr::evaluate(
      ds, [&](const dbr::ImageF32& img) { return dbr::enhance(img, model.params, model.config.pipeline); }, list);
  if (!out.empty()) write_text(out, report.to_csv());
  std::string header = "id";
  for (auto m : list) header += "," + dbr::metric_column(m);
  std::cout << header << "\n" << report.format_row(report.mean) << "\n";
  return 0;
}

int cmd_selftest(double tol) {
  dbr::SuiteOptions opt;
  if (tol > 0) opt.tol = tol;
  const auto results = dbr::run_selftest(opt);
  std::cout << dbr::format_results(results);
  const auto failed = std::count_if(results.begin(), results.end(), [](const auto& r) { return !r.passed; });
  std::cout << results.size() - static_cast<std::size_t>(failed) << "/" << results.size() << " checks passed\n";
  return failed == 0 ? 0 : 4;
}

int cmd_synth(const fs::path& out, std::size_t count, std::size_t size, std::uint64_t seed) {
  dbr::SynthConfig cfg;
  cfg.count = count;
  cfg.height = size;
  cfg.width = size;
  cfg.seed = seed;
  dbr::write_dataset(dbr::make_synthetic_dataset(cfg), out);
  std::cout << "wrote " << count << " pairs to " << out.string() << "\n";
  return 0;
}

int cmd_debug_ckpt(const fs::path& out, const fs::path& config) {
  const dbr::TrainConfig cfg = config.empty() ? dbr::TrainConfig{} : dbr::load_config(config);
  dbr::save_checkpoint(dbr::make_identity_params(cfg.predictor, cfg.pipeline), cfg, out);
  std::cout << "identity checkpoint: " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bilateral Retinex low-light enhancement"};
  app.require_subcommand(1);

  fs::path config, data, out, log, ckpt, input, output, pairs;
  std::string metrics = "psnr,ssim,loe";
  bool dump = false;
  double tol = 0.0;
  std::size_t count = 8, size = 96;
  std::uint64_t seed = 1;

  auto* train = app.add_subcommand("train", "train a model on <data>/low and <data>/high");
  train->add_option("--config", config, "key=value configuration file");
  train->add_option("--data", data, "dataset root")->required();
  train->add_option("--out", out, "checkpoint path")->required();
  train->add_option("--log", log, "loss history CSV");

  auto* enhance = app.add_subcommand("enhance", "enhance one PNG or a directory of PNGs");
  enhance->add_option("--ckpt", ckpt, "checkpoint")->required();
  enhance->add_option("--input", input, "PNG file or directory")->required();
  enhance->add_option("--output", output, "output directory")->required();
  enhance->add_flag("--dump-decomposition", dump, "also write <stem>_E/_N/_R.png");

  auto* eval = app.add_subcommand("eval", "evaluate on paired images");
  eval->add_option("--ckpt", ckpt, "checkpoint")->required();
  eval->add_option("--pairs", pairs, "dataset root with low/ and high/")->required();
  eval->add_option("--metrics", metrics, "comma-separated subset of psnr,ssim,loe");
  eval->add_option("--out", out, "CSV report path");

  auto* selftest = app.add_subcommand("selftest", "gradient, oracle, invariant and metric checks");
  selftest->add_option("--tol", tol, "override every tolerance");

  auto* synth = app.add_subcommand("synth", "write a synthetic paired dataset");
  synth->add_option("--out", out, "dataset root")->required();
  synth->add_option("--count", count, "number of pairs");
  synth->add_option("--size", size, "image side length");
  synth->add_option("--seed", seed, "random seed");

  auto* debug = app.add_subcommand("make-debug-ckpt", "write a checkpoint whose enhancement is the identity");
  debug->add_option("--out", out, "checkpoint path")->required();
  debug->add_option("--config", config, "configuration file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) return cmd_train(config, data, out, log);
    if (*enhance) return cmd_enhance(ckpt, input, output, dump);
    if (*eval) return cmd_eval(ckpt, pairs, metrics, out);
    if (*selftest) return cmd_selftest(tol);
    if (*synth) return cmd_synth(out, count, size, seed);
    if (*debug) return cmd_debug_ckpt(out, config);
  } catch (const dbr::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const dbr::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const dbr::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const dbr::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
