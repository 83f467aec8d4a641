#include "dbr/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

#include "dbr/errors.hpp"

namespace dbr {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  throw UsageError("config: key '" + key + "': cannot parse '" + value + "' as " + what);
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v, "a real number");
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  bad_value(key, v, "a boolean (true/false/on/off/1/0)");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_uint(key, trim(item)));
  if (out.empty()) bad_value(key, v, "a comma-separated list of integers");
  return out;
}

std::string real_str(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string list_str(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

template <typename E>
struct EnumNames {
  std::vector<std::pair<E, const char*>> names;

  E parse(const std::string& key, const std::string& v) const {
    for (const auto& [e, n] : names) {
      if (v == n) return e;
    }
    std::string options;
    for (const auto& [e, n] : names) options += (options.empty() ? "" : "|") + std::string(n);
    bad_value(key, v, options.c_str());
  }
  std::string str(E e) const {
    for (const auto& [x, n] : names) {
      if (x == e) return n;
    }
    return "?";
  }
};

const EnumNames<NoiseTransform> kNoise{{{NoiseTransform::deformable, "deformable"},
                                        {NoiseTransform::rigid, "rigid"},
                                        {NoiseTransform::affine, "affine"},
                                        {NoiseTransform::none, "none"}}};
const EnumNames<Intermediate> kIntermediate{{{Intermediate::noise, "noise"}, {Intermediate::noise_free, "noise_free"}}};
const EnumNames<IllumMode> kIllumMode{{{IllumMode::smooth_reparam, "smooth_reparam"}, {IllumMode::hard_clamp, "hard_clamp"}}};
const EnumNames<FidelityAux> kAux{{{FidelityAux::gradient, "gradient"}, {FidelityAux::ssim, "ssim"}}};
const EnumNames<IllumNorm> kNorm{{{IllumNorm::l1, "l1"}, {IllumNorm::l2, "l2"}}};

struct Key {
  const char* name;
  std::function<void(TrainConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define DBR_REAL(name, field)                                                                       \
  Key{name, [](TrainConfig& c, const std::string& k, const std::string& v) { c.field = parse_real(k, v); }, \
      [](const TrainConfig& c) { return real_str(c.field); }}
#define DBR_UINT(name, field)                                                                       \
  Key{name, [](TrainConfig& c, const std::string& k, const std::string& v) { c.field = parse_uint(k, v); }, \
      [](const TrainConfig& c) { return std::to_string(c.field); }}
#define DBR_BOOL(name, field)                                                                       \
  Key{name, [](TrainConfig& c, const std::string& k, const std::string& v) { c.field = parse_bool(k, v); }, \
      [](const TrainConfig& c) { return std::string(c.field ? "true" : "false"); }}
#define DBR_ENUM(name, field, table)                                                                 \
  Key{name, [](TrainConfig& c, const std::string& k, const std::string& v) { c.field = table.parse(k, v); }, \
      [](const TrainConfig& c) { return table.str(c.field); }}
#define DBR_LIST(name, field)                                                                       \
  Key{name, [](TrainConfig& c, const std::string& k, const std::string& v) { c.field = parse_list(k, v); }, \
      [](const TrainConfig& c) { return list_str(c.field); }}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      DBR_REAL("lr", optim.lr),
      DBR_REAL("beta1", optim.beta1),
      DBR_REAL("beta2", optim.beta2),
      DBR_REAL("adam_eps", optim.adam_eps),
      DBR_REAL("weight_decay", optim.weight_decay),
      DBR_UINT("batch_size", batch_size),
      DBR_UINT("epochs", epochs),
      DBR_UINT("max_iterations", max_iterations),
      DBR_UINT("checkpoint_every", checkpoint_every),
      DBR_UINT("seed", seed),
      DBR_UINT("patch_size", augment.patch_size),
      DBR_BOOL("mirror", augment.mirror),
      DBR_BOOL("rotate", augment.rotate),
      DBR_REAL("resize_min", augment.resize_min),
      DBR_REAL("resize_max", augment.resize_max),
      DBR_REAL("lambda_g", loss.lambda_g),
      DBR_REAL("lambda_n", loss.lambda_n),
      DBR_REAL("lambda_e", loss.lambda_e),
      DBR_REAL("theta", loss.theta),
      DBR_REAL("epsilon", loss.epsilon),
      DBR_REAL("sigma", loss.sigma),
      DBR_UINT("gauss_radius", loss.gauss_radius),
      DBR_ENUM("fidelity_aux", loss.fidelity_aux, kAux),
      DBR_ENUM("illum_norm", loss.illum_norm, kNorm),
      DBR_ENUM("noise_transform", pipeline.noise_transform, kNoise),
      DBR_ENUM("intermediate", pipeline.intermediate, kIntermediate),
      DBR_REAL("window", pipeline.window),
      DBR_UINT("kernel_size", pipeline.kernel_size),
      DBR_ENUM("illum_mode", pipeline.illum_mode, kIllumMode),
      DBR_BOOL("clamp_output", pipeline.clamp_output),
      DBR_UINT("input_size", predictor.input_size),
      DBR_LIST("local_widths", predictor.local_widths),
      DBR_LIST("fc_widths", predictor.fc_widths),
      DBR_UINT("grid_depth", predictor.grid_depth),
  };
  return table;
}

#undef DBR_REAL
#undef DBR_UINT
#undef DBR_BOOL
#undef DBR_ENUM
#undef DBR_LIST

}  // namespace

TrainConfig parse_config(const std::string& text) {
  TrainConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config: line " + std::to_string(lineno) + ": expected key=value, got '" + t + "'");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const Key* match = nullptr;
    for (const auto& k : keys()) {
      if (key == k.name) match = &k;
    }
    if (!match) throw UsageError("config: unknown key '" + key + "' on line " + std::to_string(lineno));
    if (!seen.insert(key).second) throw UsageError("config: duplicate key '" + key + "'");
    match->set(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("config: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const TrainConfig& cfg) {
  std::string out;
  for (const auto& k : keys()) out += std::string(k.name) + "=" + k.get(cfg) + "\n";
  return out;
}

}  // namespace dbr
