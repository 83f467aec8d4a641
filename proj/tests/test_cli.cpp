#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "dbr/image.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(DBR_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe);
  std::array<char, 4096> buf{};
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dbr_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

const char* kTinyConfig =
    "input_size=32\nlocal_widths=4,8\nfc_widths=16,8\nbatch_size=2\nepochs=0\nmax_iterations=2\npatch_size=24\n";

}  // namespace

TEST_CASE("train") {
  const auto dir = scratch("train");
  REQUIRE(run("synth --out " + (dir / "data").string() + " --count 2 --size 32").code == 0);
  spit(dir / "tiny.cfg", kTinyConfig);
  const auto ok = run("train --config " + (dir / "tiny.cfg").string() + " --data " + (dir / "data").string() +
                      " --out " + (dir / "m.ckpt").string() + " --log " + (dir / "loss.csv").string());
  CHECK(ok.code == 0);
  CHECK(fs::exists(dir / "m.ckpt"));
  CHECK(slurp(dir / "loss.csv").rfind("iter,total,l_r,l_n,l_e\n", 0) == 0);

  spit(dir / "bad.cfg", "lambda_q=1\n");
  const auto bad = run("train --config " + (dir / "bad.cfg").string() + " --data " + (dir / "data").string() +
                       " --out " + (dir / "x.ckpt").string());
  CHECK(bad.code == 2);
  CHECK(bad.output.find("lambda_q") != std::string::npos);

  const auto missing = run("train --config " + (dir / "tiny.cfg").string() + " --data " + (dir / "nowhere").string() +
                           " --out " + (dir / "y.ckpt").string());
  CHECK(missing.code == 3);
  CHECK_FALSE(fs::exists(dir / "y.ckpt"));

  CHECK(run("train --data " + (dir / "data").string()).code == 2);
  CHECK(run("frobnicate").code == 2);
}

TEST_CASE("enhance") {
  const auto dir = scratch("enhance");
  REQUIRE(run("synth --out " + (dir / "data").string() + " --count 3 --size 24").code == 0);
  spit(dir / "tiny.cfg", kTinyConfig);
  REQUIRE(run("make-debug-ckpt --config " + (dir / "tiny.cfg").string() + " --out " + (dir / "id.ckpt").string()).code ==
          0);

  const auto single = run("enhance --ckpt " + (dir / "id.ckpt").string() + " --input " +
                          (dir / "data" / "low" / "pair_000.png").string() + " --output " + (dir / "one").string());
  CHECK(single.code == 0);
  CHECK(fs::exists(dir / "one" / "pair_000_enhanced.png"));
  // The identity checkpoint reproduces the input pixels.
  CHECK(dbr::load_image(dir / "one" / "pair_000_enhanced.png").data ==
        dbr::load_image(dir / "data" / "low" / "pair_000.png").data);

  const auto many = run("enhance --ckpt " + (dir / "id.ckpt").string() + " --input " + (dir / "data" / "low").string() +
                        " --output " + (dir / "all").string() + " --dump-decomposition");
  CHECK(many.code == 0);
  std::size_t enhanced = 0;
  for (const auto& e : fs::directory_iterator(dir / "all"))
    if (e.path().filename().string().ends_with("_enhanced.png")) ++enhanced;
  CHECK(enhanced == 3);
  CHECK(fs::exists(dir / "all" / "pair_002_R.png"));
  const auto a = many.output.find("pair_000"), b = many.output.find("pair_001"), c = many.output.find("pair_002");
  REQUIRE(a != std::string::npos);
  REQUIRE(c != std::string::npos);
  CHECK(a < b);
  CHECK(b < c);

  std::string bytes = slurp(dir / "id.ckpt");
  bytes[4] = 7;
  spit(dir / "v7.ckpt", bytes);
  CHECK(run("enhance --ckpt " + (dir / "v7.ckpt").string() + " --input " + (dir / "data" / "low").string() +
            " --output " + (dir / "v7").string())
            .code == 5);
}

TEST_CASE("eval") {
  const auto dir = scratch("eval");
  REQUIRE(run("synth --out " + (dir / "data").string() + " --count 2 --size 24").code == 0);
  fs::create_directories(dir / "same" / "low");
  fs::create_directories(dir / "same" / "high");
  for (const char* n : {"pair_000.png", "pair_001.png"}) {
    fs::copy_file(dir / "data" / "high" / n, dir / "same" / "low" / n);
    fs::copy_file(dir / "data" / "high" / n, dir / "same" / "high" / n);
  }
  spit(dir / "tiny.cfg", kTinyConfig);
  REQUIRE(run("make-debug-ckpt --config " + (dir / "tiny.cfg").string() + " --out " + (dir / "id.ckpt").string()).code ==
          0);

  const auto full = run("eval --ckpt " + (dir / "id.ckpt").string() + " --pairs " + (dir / "same").string() +
                        " --metrics psnr,ssim,loe --out " + (dir / "r.csv").string());
  CHECK(full.code == 0);
  const std::string csv = slurp(dir / "r.csv");
  const auto mean = csv.find("MEAN,");
  REQUIRE(mean != std::string::npos);
  std::istringstream row(csv.substr(mean + 5));
  double psnr = 0, ssim = 0, loe = -1;
  char comma;
  row >> psnr >> comma >> ssim >> comma >> loe;
  CHECK(psnr == 99.0);
  CHECK(ssim == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(loe == 0.0);

  REQUIRE(run("eval --ckpt " + (dir / "id.ckpt").string() + " --pairs " + (dir / "same").string() +
              " --metrics psnr --out " + (dir / "p.csv").string())
              .code == 0);
  std::istringstream lines(slurp(dir / "p.csv"));
  std::string line;
  while (std::getline(lines, line)) CHECK(std::count(line.begin(), line.end(), ',') == 1);

  fs::create_directories(dir / "odd" / "low");
  fs::create_directories(dir / "odd" / "high");
  fs::copy_file(dir / "data" / "low" / "pair_000.png", dir / "odd" / "low" / "a.png");
  fs::copy_file(dir / "data" / "high" / "pair_000.png", dir / "odd" / "high" / "b.png");
  CHECK(run("eval --ckpt " + (dir / "id.ckpt").string() + " --pairs " + (dir / "odd").string()).code == 3);
  CHECK(run("eval --ckpt " + (dir / "id.ckpt").string() + " --pairs " + (dir / "same").string() + " --metrics mae")
            .code == 2);
}

TEST_CASE("selftest") {
  const auto pass = run("selftest");
  CHECK(pass.code == 0);
  const auto strict = run("selftest --tol 1e-12");
  CHECK(strict.code != 0);
  CHECK(strict.output.find("FAIL") != std::string::npos);
}
