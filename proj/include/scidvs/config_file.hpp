#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "scidvs/core.hpp"

namespace scidvs {

/// Flat `key = value` pairs, sorted by key.
using KeyValues = std::map<std::string, std::string>;

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
/// Malformed lines and duplicate keys are reported together in a ConfigError.
KeyValues parse_key_values(std::string_view text);

KeyValues read_key_value_file(const std::filesystem::path& path);

struct ConfigKeyInfo {
  std::string name;
  std::string units;
  std::string help;
};

/// Every SensorConfig key, with units, in canonical order.
const std::vector<ConfigKeyInfo>& config_keys();
bool is_config_key(std::string_view key);

/// Assigns one key. Throws ConfigError on an unknown key or unparsable value.
void apply_config_key(SensorConfig& cfg, const std::string& key, const std::string& value);

/// Builds a config from `kv` on top of `base`. Keys under `scene.` are left for
/// the scene loader; any other unknown key is an error. The result is not
/// validated.
SensorConfig config_from_key_values(const KeyValues& kv, SensorConfig base = {});

/// Canonical text form, one `key = value` line per config key. Parsing it back
/// yields an identical config.
std::string config_to_text(const SensorConfig& cfg);

}  // namespace scidvs
