#include "scidvs/config_file.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

namespace scidvs {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) throw ConfigError({key + ": expected a number, got '" + value + "'"});
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end)
    throw ConfigError({key + ": expected a non-negative integer, got '" + value + "'"});
  return out;
}

int parse_int(const std::string& key, const std::string& value) {
  int out = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) throw ConfigError({key + ": expected an integer, got '" + value + "'"});
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "off" || value == "no") return false;
  throw ConfigError({key + ": expected true/false, got '" + value + "'"});
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

struct KeyBinding {
  ConfigKeyInfo info;
  std::function<void(SensorConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const SensorConfig&)> get;
};

#define SCIDVS_DOUBLE_KEY(field, units, help)                                                     \
  KeyBinding {                                                                                    \
    {#field, units, help},                                                                        \
        [](SensorConfig& c, const std::string& k, const std::string& v) { c.field = parse_double(k, v); }, \
        [](const SensorConfig& c) { return fmt_double(c.field); }                                 \
  }
#define SCIDVS_U64_KEY(field, units, help)                                                        \
  KeyBinding {                                                                                    \
    {#field, units, help},                                                                        \
        [](SensorConfig& c, const std::string& k, const std::string& v) { c.field = parse_u64(k, v); }, \
        [](const SensorConfig& c) { return std::to_string(c.field); }                             \
  }
#define SCIDVS_INT_KEY(field, units, help)                                                        \
  KeyBinding {                                                                                    \
    {#field, units, help},                                                                        \
        [](SensorConfig& c, const std::string& k, const std::string& v) { c.field = parse_int(k, v); }, \
        [](const SensorConfig& c) { return std::to_string(c.field); }                             \
  }
#define SCIDVS_BOOL_KEY(field, units, help)                                                       \
  KeyBinding {                                                                                    \
    {#field, units, help},                                                                        \
        [](SensorConfig& c, const std::string& k, const std::string& v) { c.field = parse_bool(k, v); }, \
        [](const SensorConfig& c) { return std::string(c.field ? "true" : "false"); }             \
  }

const std::vector<KeyBinding>& bindings() {
  static const std::vector<KeyBinding> table = {
      SCIDVS_INT_KEY(width, "px", "array width"),
      SCIDVS_INT_KEY(height, "px", "array height"),
      SCIDVS_DOUBLE_KEY(pixel_pitch_um, "um", "photodiode side length"),
      SCIDVS_DOUBLE_KEY(qe, "1", "quantum efficiency in (0, 1]"),
      SCIDVS_DOUBLE_KEY(theta_on, "detector units", "ON threshold at the change-detector input"),
      SCIDVS_DOUBLE_KEY(theta_off, "detector units", "OFF threshold at the change-detector input"),
      SCIDVS_BOOL_KEY(preamp_enabled, "flag", "enable the in-pixel preamp (false = standard DVS mode)"),
      SCIDVS_DOUBLE_KEY(preamp_gain, "1", "preamp gain, >= 1"),
      SCIDVS_DOUBLE_KEY(preamp_sat, "detector units", "half-width of the preamp linear window"),
      SCIDVS_BOOL_KEY(auto_center_enabled, "flag", "re-center the preamp after each event"),
      SCIDVS_DOUBLE_KEY(f_cut_hz, "Hz", "low-pass buffer cutoff frequency"),
      SCIDVS_U64_KEY(refractory_us, "us", "refractory period after each event"),
      SCIDVS_BOOL_KEY(binning_enabled, "flag", "2x2 photocurrent binning"),
      SCIDVS_BOOL_KEY(force_reset, "flag", "with binning, only the top-left pixel of each group emits events"),
      SCIDVS_DOUBLE_KEY(mismatch_sigma, "1", "log-normal sigma of per-pixel threshold factors"),
      KeyBinding{{"noise_mode", "enum", "poisson_plus_buffer | analytic_gaussian | off"},
                 [](SensorConfig& c, const std::string&, const std::string& v) {
                   c.noise_mode = noise_mode_from_string(v);
                 },
                 [](const SensorConfig& c) { return to_string(c.noise_mode); }},
      SCIDVS_DOUBLE_KEY(noise_factor, "1", "filtered log-noise variance in units of 1/N (2 = 2x shot noise)"),
      SCIDVS_U64_KEY(dt_us, "us", "simulation step, <= 1e6/(20 f_cut_hz)"),
      SCIDVS_U64_KEY(seed, "1", "64-bit reproducibility seed"),
      SCIDVS_DOUBLE_KEY(aps_fullwell_e, "e-", "APS full-well capacity"),
  };
  return table;
}

#undef SCIDVS_DOUBLE_KEY
#undef SCIDVS_U64_KEY
#undef SCIDVS_INT_KEY
#undef SCIDVS_BOOL_KEY

const KeyBinding* find_binding(std::string_view key) {
  for (const auto& b : bindings())
    if (b.info.name == key) return &b;
  return nullptr;
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues out;
  std::vector<std::string> errors;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(line_no) + ": expected 'key = value'");
      continue;
    }
    auto key = trim(std::string_view(body).substr(0, eq));
    auto value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) {
      errors.push_back("line " + std::to_string(line_no) + ": empty key");
      continue;
    }
    if (!out.emplace(key, value).second)
      errors.push_back("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return out;
}

KeyValues read_key_value_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

const std::vector<ConfigKeyInfo>& config_keys() {
  static const std::vector<ConfigKeyInfo> keys = [] {
    std::vector<ConfigKeyInfo> k;
    for (const auto& b : bindings()) k.push_back(b.info);
    return k;
  }();
  return keys;
}

bool is_config_key(std::string_view key) { return find_binding(key) != nullptr; }

void apply_config_key(SensorConfig& cfg, const std::string& key, const std::string& value) {
  const auto* b = find_binding(key);
  if (b == nullptr) throw ConfigError({"unknown key '" + key + "'"});
  b->set(cfg, key, value);
}

SensorConfig config_from_key_values(const KeyValues& kv, SensorConfig base) {
  std::vector<std::string> errors;
  for (const auto& [key, value] : kv) {
    if (key.rfind("scene.", 0) == 0) continue;
    try {
      apply_config_key(base, key, value);
    } catch (const ConfigError& e) {
      errors.insert(errors.end(), e.violations().begin(), e.violations().end());
    }
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return base;
}

std::string config_to_text(const SensorConfig& cfg) {
  std::ostringstream os;
  for (const auto& b : bindings()) os << b.info.name << " = " << b.get(cfg) << '\n';
  return os.str();
}

}  // namespace scidvs
