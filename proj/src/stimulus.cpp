#include "scidvs/stimulus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

namespace scidvs {

namespace {

bool open_unit(double c) { return c > -1.0 && c < 1.0; }

struct LuxVisitor {
  int x;
  int y;
  std::uint64_t t_us;

  double operator()(const ConstantScene& s) const { return s.lux; }

  double operator()(const StepProtocol& s) const {
    if (t_us >= s.t_test_us) return s.base_lux * (1.0 + s.test_contrast);
    if (t_us >= s.t_reset_us && t_us < s.reset_end_us()) return s.base_lux * (1.0 + s.reset_contrast);
    return s.base_lux;
  }

  double operator()(const RotatingChart& s) const {
    const auto phase = chart_phase(s, x, y, t_us);
    if (phase.sector == ChartSector::Background) return s.base_lux;
    const auto& w = s.wedges[static_cast<std::size_t>(phase.wedge)];
    const double dir = sign(w.polarity);
    const double reset_level = s.base_lux * (1.0 - dir * s.reset_edge_contrast);
    if (phase.sector == ChartSector::Reset) return reset_level;
    return reset_level * (1.0 + dir * w.contrast);
  }

  double operator()(const MovingPattern& s) const {
    const double t = static_cast<double>(t_us) * 1e-6;
    const double mx = std::floor(static_cast<double>(x) - s.velocity_x * t);
    const double my = std::floor(static_cast<double>(y) - s.velocity_y * t);
    const auto wrap = [](double v, int n) {
      const double m = std::fmod(v, static_cast<double>(n));
      return static_cast<int>(m < 0 ? m + n : m);
    };
    const int u = wrap(mx, s.mask.width);
    const int v = wrap(my, s.mask.height);
    const bool on = 2 * static_cast<int>(s.mask.at(u, v)) > s.mask.maxval;
    return s.base_lux * (on ? 1.0 + s.pattern_contrast : 1.0);
  }
};

double parse_number(const std::string& key, const std::string& value) {
  double out = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) throw ConfigError({key + ": expected a number, got '" + value + "'"});
  return out;
}

std::uint64_t parse_time(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end)
    throw ConfigError({key + ": expected a non-negative integer, got '" + value + "'"});
  return out;
}

std::string strip(std::string s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) {
    item = strip(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// "0.01:on, 0.017:off"
std::vector<ChartWedge> parse_wedges(const std::string& value) {
  std::vector<ChartWedge> out;
  for (const auto& item : split(value, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError({"scene.wedges: expected contrast:on|off, got '" + item + "'"});
    ChartWedge w;
    w.contrast = parse_number("scene.wedges", strip(item.substr(0, colon)));
    const auto pol = strip(item.substr(colon + 1));
    if (pol == "on") {
      w.polarity = Polarity::On;
    } else if (pol == "off") {
      w.polarity = Polarity::Off;
    } else {
      throw ConfigError({"scene.wedges: polarity must be on or off, got '" + pol + "'"});
    }
    out.push_back(w);
  }
  return out;
}

// "x0 y0 x1 y1 factor; ..."
std::vector<RegionAttenuation> parse_attenuations(const std::string& value) {
  std::vector<RegionAttenuation> out;
  for (const auto& item : split(value, ';')) {
    std::istringstream is(item);
    RegionAttenuation r;
    if (!(is >> r.x0 >> r.y0 >> r.x1 >> r.y1 >> r.factor) || !(is >> std::ws).eof())
      throw ConfigError({"scene.attenuation: expected 'x0 y0 x1 y1 factor', got '" + item + "'"});
    out.push_back(r);
  }
  return out;
}

const std::set<std::string>& keys_for(const std::string& type) {
  static const std::set<std::string> constant = {"scene.type", "scene.base_lux", "scene.attenuation"};
  static const std::set<std::string> step = {
      "scene.type",       "scene.base_lux",          "scene.attenuation", "scene.reset_contrast",
      "scene.test_contrast", "scene.t_reset_us",     "scene.reset_duration_us", "scene.t_test_us",
      "scene.t_window_us"};
  static const std::set<std::string> chart = {
      "scene.type",          "scene.base_lux",   "scene.attenuation", "scene.wedges",
      "scene.reset_edge_contrast", "scene.rotation_hz", "scene.center_x", "scene.center_y",
      "scene.background_fraction", "scene.reset_fraction"};
  static const std::set<std::string> moving = {"scene.type",       "scene.base_lux",   "scene.attenuation",
                                               "scene.mask",       "scene.velocity_x", "scene.velocity_y",
                                               "scene.pattern_contrast"};
  if (type == "constant") return constant;
  if (type == "step") return step;
  if (type == "chart") return chart;
  if (type == "moving") return moving;
  throw ConfigError({"scene.type: unknown type '" + type + "' (expected constant, step, chart or moving)"});
}

}  // namespace

std::vector<std::string> scene_violations(const SceneSpec& scene) {
  std::vector<std::string> v;
  auto fail = [&](std::string s) { v.push_back(std::move(s)); };
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ConstantScene>) {
          if (!(s.lux >= 0)) fail("scene.base_lux: must be >= 0");
        } else {
          if (!(s.base_lux >= 0)) fail("scene.base_lux: must be >= 0");
        }
        if constexpr (std::is_same_v<T, StepProtocol>) {
          if (!open_unit(s.reset_contrast)) fail("scene.reset_contrast: must lie in (-1, 1)");
          if (!open_unit(s.test_contrast)) fail("scene.test_contrast: must lie in (-1, 1)");
          if (s.reset_end_us() > s.t_test_us) fail("scene.t_test_us: reset pulse must end before the test step");
          if (s.t_window_us == 0) fail("scene.t_window_us: must be > 0");
        }
        if constexpr (std::is_same_v<T, RotatingChart>) {
          if (s.wedges.empty()) fail("scene.wedges: at least one wedge required");
          for (const auto& w : s.wedges)
            if (!(w.contrast > 0 && w.contrast < 1)) fail("scene.wedges: contrast must lie in (0, 1)");
          if (!(s.reset_edge_contrast > 0 && s.reset_edge_contrast < 1))
            fail("scene.reset_edge_contrast: must lie in (0, 1)");
          if (!(s.rotation_hz > 0)) fail("scene.rotation_hz: must be > 0");
          if (!(s.background_fraction >= 0) || !(s.reset_fraction > 0) || !(s.test_fraction() > 0))
            fail("scene.background_fraction, scene.reset_fraction: need reset > 0 and background + reset < 1");
        }
        if constexpr (std::is_same_v<T, MovingPattern>) {
          if (s.mask.width <= 0 || s.mask.height <= 0) fail("scene.mask: empty mask");
          if (!open_unit(s.pattern_contrast)) fail("scene.pattern_contrast: must lie in (-1, 1)");
        }
      },
      scene.pattern);
  for (const auto& a : scene.attenuations) {
    if (!(a.factor > 0 && a.factor <= 1)) fail("scene.attenuation: factor must lie in (0, 1]");
    if (a.x1 <= a.x0 || a.y1 <= a.y0) fail("scene.attenuation: empty rectangle");
  }
  return v;
}

SceneSpec validate_scene(const SceneSpec& scene) {
  auto v = scene_violations(scene);
  if (!v.empty()) throw ConfigError(std::move(v));
  return scene;
}

double illuminance_at(const SceneSpec& scene, int x, int y, std::uint64_t t_us) {
  double lux = std::visit(LuxVisitor{x, y, t_us}, scene.pattern);
  for (const auto& a : scene.attenuations)
    if (x >= a.x0 && x < a.x1 && y >= a.y0 && y < a.y1) lux *= a.factor;
  return lux;
}

double photoelectron_rate(double lux, const SensorConfig& cfg, bool binned) {
  return lux * kPhotonsPerLuxSecondUm2 * cfg.qe * cfg.pixel_pitch_um * cfg.pixel_pitch_um *
         (binned ? 4.0 : 1.0);
}

ChartPhase chart_phase(const RotatingChart& chart, int x, int y, std::uint64_t t_us) {
  double phi = std::atan2(static_cast<double>(y) - chart.center_y, static_cast<double>(x) - chart.center_x);
  if (phi < 0) phi += 2.0 * std::numbers::pi;
  return chart_phase_at(chart, phi, t_us);
}

ChartPhase chart_phase_at(const RotatingChart& chart, double phi, std::uint64_t t_us) {
  const double turns = phi / (2.0 * std::numbers::pi) + chart.rotation_hz * static_cast<double>(t_us) * 1e-6;
  const double n = static_cast<double>(chart.wedges.size());
  const double u = turns * n;
  const double slot = std::floor(u);
  const double frac = u - slot;
  const auto slot_i = static_cast<std::int64_t>(slot);
  const auto nw = static_cast<std::int64_t>(chart.wedges.size());

  ChartPhase p;
  p.revolution = slot_i >= 0 ? slot_i / nw : -((-slot_i + nw - 1) / nw);
  p.wedge = static_cast<int>(slot_i - p.revolution * nw);
  if (frac < chart.background_fraction) {
    p.sector = ChartSector::Background;
  } else if (frac < chart.background_fraction + chart.reset_fraction) {
    p.sector = ChartSector::Reset;
  } else {
    p.sector = ChartSector::Test;
  }
  return p;
}

RotatingChart centered_chart(const SensorConfig& cfg, double base_lux, std::vector<ChartWedge> wedges) {
  RotatingChart chart;
  chart.base_lux = base_lux;
  chart.wedges = std::move(wedges);
  chart.center_x = 0.5 * (cfg.width - 1);
  chart.center_y = 0.5 * (cfg.height - 1);
  return chart;
}

SceneSpec scene_from_key_values(const KeyValues& kv, const SensorConfig& cfg, const std::filesystem::path& base_dir) {
  const auto type_it = kv.find("scene.type");
  if (type_it == kv.end()) throw ConfigError({"scene.type: missing"});
  const std::string type = type_it->second;
  const auto& allowed = keys_for(type);

  std::vector<std::string> errors;
  for (const auto& [key, value] : kv) {
    if (is_config_key(key)) continue;
    if (key.rfind("scene.", 0) != 0) {
      errors.push_back("unknown key '" + key + "'");
    } else if (!allowed.contains(key)) {
      errors.push_back("key '" + key + "' is not valid for scene.type = " + type);
    }
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));

  auto get = [&](const char* key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  auto number = [&](const char* key, double fallback) {
    const auto* v = get(key);
    return v ? parse_number(key, *v) : fallback;
  };
  auto time = [&](const char* key, std::uint64_t fallback) {
    const auto* v = get(key);
    return v ? parse_time(key, *v) : fallback;
  };

  SceneSpec scene;
  if (type == "constant") {
    scene.pattern = ConstantScene{number("scene.base_lux", 1.0)};
  } else if (type == "step") {
    StepProtocol s;
    s.base_lux = number("scene.base_lux", s.base_lux);
    s.reset_contrast = number("scene.reset_contrast", s.reset_contrast);
    s.test_contrast = number("scene.test_contrast", s.test_contrast);
    s.t_reset_us = time("scene.t_reset_us", s.t_reset_us);
    s.reset_duration_us = time("scene.reset_duration_us", s.reset_duration_us);
    s.t_test_us = time("scene.t_test_us", s.t_test_us);
    s.t_window_us = time("scene.t_window_us", s.t_window_us);
    scene.pattern = s;
  } else if (type == "chart") {
    const auto* wedges = get("scene.wedges");
    RotatingChart c = centered_chart(cfg, number("scene.base_lux", 0.7), wedges ? parse_wedges(*wedges)
                                                                               : std::vector<ChartWedge>{});
    c.reset_edge_contrast = number("scene.reset_edge_contrast", c.reset_edge_contrast);
    c.rotation_hz = number("scene.rotation_hz", c.rotation_hz);
    c.center_x = number("scene.center_x", c.center_x);
    c.center_y = number("scene.center_y", c.center_y);
    c.background_fraction = number("scene.background_fraction", c.background_fraction);
    c.reset_fraction = number("scene.reset_fraction", c.reset_fraction);
    scene.pattern = c;
  } else {
    MovingPattern m;
    m.base_lux = number("scene.base_lux", m.base_lux);
    const auto* mask = get("scene.mask");
    if (mask == nullptr) throw ConfigError({"scene.mask: required for scene.type = moving"});
    std::filesystem::path p(*mask);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    m.mask = read_pgm(p);
    m.velocity_x = number("scene.velocity_x", m.velocity_x);
    m.velocity_y = number("scene.velocity_y", m.velocity_y);
    m.pattern_contrast = number("scene.pattern_contrast", m.pattern_contrast);
    scene.pattern = std::move(m);
  }
  if (const auto* att = get("scene.attenuation")) scene.attenuations = parse_attenuations(*att);
  return validate_scene(scene);
}

}  // namespace scidvs
