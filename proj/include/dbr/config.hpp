#pragma once

#include <filesystem>
#include <string>

#include "dbr/trainer.hpp"

namespace dbr {

/// Flat `key=value` run configuration. Blank lines and lines starting with
/// '#' are ignored. Unknown keys, duplicate keys and malformed values raise
/// UsageError naming the offending key.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);

/// Every key, one per line, in a fixed order. parse_config(serialize_config(c))
/// reproduces c exactly.
std::string serialize_config(const TrainConfig& cfg);

}  // namespace dbr
