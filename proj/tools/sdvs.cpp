// sdvs: command-line front end for the sensor simulator.
//
//   sdvs <command> [--config FILE] [--scene FILE] [--out DIR] [--workers N] [--<key> VALUE ...]
//
// Every sensor config key is also a flag. Values resolve as flag > file > default.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "scidvs/characterize.hpp"
#include "scidvs/config_file.hpp"
#include "scidvs/pixel.hpp"
#include "scidvs/readout.hpp"

namespace fs = std::filesystem;
using namespace scidvs;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitPrecondition = 4;

struct Common {
  std::string config_path;
  std::string scene_path;
  std::string out_dir;
  unsigned workers = 1;
  std::map<std::string, std::string> overrides;  // set config-key flags
};

struct Run {
  std::string command;
  std::vector<std::string> args;  // argv after the program name
  Common common;
  SensorConfig cfg;
  KeyValues file_kv;
  KeyValues scene_kv;
  fs::path scene_base;
  fs::path out;
};

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError({what + ": bad number '" + item + "'"});
    }
  }
  if (out.empty()) throw ConfigError({what + ": empty list"});
  return out;
}

std::string timestamp(const char* fmt) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, fmt);
  return os.str();
}

fs::path make_out_dir(const std::string& requested, const std::string& command) {
  fs::path dir = requested;
  if (dir.empty()) {
    const fs::path base = fs::path("runs") / (command + "_" + timestamp("%Y%m%d_%H%M%S"));
    dir = base;
    for (int i = 1; fs::exists(dir); ++i) dir = base.string() + "_" + std::to_string(i);
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) { write_file(path, text); }

// Builds the config (defaults, then file, then flags) and collects scene keys.
void resolve(Run& run) {
  if (!run.common.config_path.empty()) {
    run.file_kv = read_key_value_file(run.common.config_path);
    run.cfg = config_from_key_values(run.file_kv);
    run.scene_base = fs::path(run.common.config_path).parent_path();
    for (const auto& [k, v] : run.file_kv)
      if (k.starts_with("scene.")) run.scene_kv[k] = v;
  }
  if (!run.common.scene_path.empty()) {
    const auto kv = read_key_value_file(run.common.scene_path);
    run.scene_kv.clear();
    std::vector<std::string> errors;
    for (const auto& [k, v] : kv) {
      if (k.starts_with("scene.")) run.scene_kv[k] = v;
      else errors.push_back(k + ": not a scene key");
    }
    if (!errors.empty()) throw ConfigError(errors);
    run.scene_base = fs::path(run.common.scene_path).parent_path();
  }
  std::vector<std::string> errors;
  for (const auto& [k, v] : run.common.overrides) {
    try {
      apply_config_key(run.cfg, k, v);
    } catch (const ConfigError& e) {
      errors.insert(errors.end(), e.violations().begin(), e.violations().end());
    }
  }
  if (!errors.empty()) throw ConfigError(errors);
  validate_config(run.cfg);
}

SceneSpec load_scene(const Run& run) {
  if (run.scene_kv.empty()) throw ConfigError({"scene: no scene.* keys given (use --scene or the config file)"});
  return validate_scene(scene_from_key_values(run.scene_kv, run.cfg, run.scene_base));
}

std::string absolute_path(const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); }

// argv with input paths made absolute, so a replay works from any directory.
std::vector<std::string> replayable_args(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& a = args[i];
    if ((a == "--config" || a == "--scene") && i + 1 < args.size()) {
      out.push_back(a);
      out.push_back(absolute_path(args[++i]));
    } else if (a.starts_with("--config=") || a.starts_with("--scene=")) {
      const auto eq = a.find('=');
      out.push_back(a.substr(0, eq + 1) + absolute_path(a.substr(eq + 1)));
    } else {
      out.push_back(a);
    }
  }
  return out;
}

void write_manifest(const Run& run) {
  nlohmann::json m;
  m["command"] = run.command;
  m["argv"] = replayable_args(run.args);
  m["config_path"] = absolute_path(run.common.config_path);
  m["scene_path"] = absolute_path(run.common.scene_path);
  m["output_dir"] = run.out.string();
  m["seed"] = run.cfg.seed;
  if (auto it = run.common.overrides.find("seed"); it != run.common.overrides.end()) m["seed_override"] = it->second;
  m["timestamp"] = timestamp("%Y-%m-%dT%H:%M:%SZ");
  m["workers"] = run.common.workers;
  write_text(run.out / "manifest.json", m.dump(2) + "\n");
  write_text(run.out / "config.txt", config_to_text(run.cfg));
}

EventFormat parse_format(const std::string& name) {
  if (name == "csv") return EventFormat::Csv;
  if (name == "binary") return EventFormat::Binary;
  throw ConfigError({"format: expected csv or binary, got '" + name + "'"});
}

Polarity parse_polarity(const std::string& name) {
  if (name == "on") return Polarity::On;
  if (name == "off") return Polarity::Off;
  throw ConfigError({"polarity: expected on or off, got '" + name + "'"});
}

// --- commands ---------------------------------------------------------------

struct SimulateOpts {
  std::uint64_t duration_us = 1'000'000;
  std::string format = "binary";
};

void cmd_simulate(Run& run, const SimulateOpts& o) {
  resolve(run);
  const auto format = parse_format(o.format);
  const auto scene = load_scene(run);
  run.out = make_out_dir(run.common.out_dir, run.command);
  PixelArray array(run.cfg);
  array.initialize(scene, 0);
  const auto events = array.advance_to(scene, o.duration_us, run.common.workers);
  const auto name = format == EventFormat::Csv ? "events.csv" : "events.bin";
  write_text(run.out / name, serialize_events(events, format, run.cfg.width, run.cfg.height));
  write_manifest(run);
  std::cout << "events " << events.size() << " -> " << (run.out / name).string() << "\n";
}

struct ScurveOpts {
  std::string contrasts = "0.005,0.01,0.015,0.02,0.025,0.03";
  int trials = 1;
  std::string polarity = "on";
  double lux = 40.0;
};

void cmd_scurve(Run& run, const ScurveOpts& o) {
  resolve(run);
  const auto contrasts = parse_list(o.contrasts, "contrasts");
  const auto polarity = parse_polarity(o.polarity);
  run.out = make_out_dir(run.common.out_dir, run.command);
  const auto curve = measure_s_curve(run.cfg, contrasts, o.lux, o.trials, polarity, run.common.workers);
  write_text(run.out / "scurve.csv", to_csv(curve));
  auto j = to_json(curve);
  j["nominal_nct"] = nominal_nct(run.cfg, polarity);
  write_text(run.out / "scurve.json", j.dump(2) + "\n");
  write_manifest(run);
  const auto nct = estimate_nct(curve);
  std::cout << "polarity " << o.polarity << " control " << curve.points.front().fraction << " nct "
            << (nct ? std::to_string(*nct) : std::string("not-reached")) << " nominal " << nominal_nct(run.cfg, polarity)
            << "\n";
}

struct NoiseOpts {
  std::string sweep = "lux";
  std::string values = "0.1,1,10";
  double lux = 0.21;
  std::uint64_t duration_us = 2'000'000;
};

void cmd_noise(Run& run, const NoiseOpts& o) {
  resolve(run);
  const auto values = parse_list(o.values, "values");
  if (o.sweep != "lux" && o.sweep != "fcut") throw ConfigError({"sweep: expected lux or fcut, got '" + o.sweep + "'"});
  run.out = make_out_dir(run.common.out_dir, run.command);
  nlohmann::json j;
  std::string csv;
  if (o.sweep == "lux") {
    const auto s = noise_sweep_illuminance(run.cfg, values, o.duration_us, run.common.workers);
    j["binned"] = to_json(s.binned);
    j["unbinned"] = to_json(s.unbinned);
    csv = to_csv(s.binned);
    const auto rest = to_csv(s.unbinned);
    csv += rest.substr(rest.find('\n') + 1);
    for (std::size_t i = 0; i < values.size(); ++i)
      std::cout << "lux " << values[i] << " binned_hz " << s.binned.points[i].rate_hz << " unbinned_hz "
                << s.unbinned.points[i].rate_hz << "\n";
  } else {
    const auto s = noise_sweep_fcut(run.cfg, values, o.lux, o.duration_us, run.common.workers);
    j = to_json(s);
    j["lux"] = o.lux;
    csv = to_csv(s);
    for (const auto& p : s.points) std::cout << "f_cut_hz " << p.value << " rate_hz " << p.rate_hz << "\n";
  }
  write_text(run.out / "noise.csv", csv);
  write_text(run.out / "noise.json", j.dump(2) + "\n");
  write_manifest(run);
}

struct ChartOpts {
  int revolutions = 2;
  double inner = 0.25;
  double outer = 1.0;
  double noise_limit = kChartNoiseLimitHz;
};

void cmd_chart(Run& run, const ChartOpts& o) {
  resolve(run);
  const auto scene = load_scene(run);
  const auto* chart = std::get_if<RotatingChart>(&scene.pattern);
  if (!chart) throw ConfigError({"scene.type: chart command needs scene.type = chart"});
  if (!scene.attenuations.empty()) throw ConfigError({"scene.attenuation: not supported for chart detection"});
  run.out = make_out_dir(run.common.out_dir, run.command);
  ChartOptions opts;
  opts.revolutions = o.revolutions;
  opts.inner_radius = o.inner;
  opts.outer_radius = o.outer;
  opts.noise_limit_hz = o.noise_limit;
  const auto report = chart_detection(run.cfg, *chart, opts, run.common.workers);
  write_text(run.out / "chart.csv", to_csv(report));
  write_text(run.out / "chart.json", to_json(report).dump(2) + "\n");
  const auto window = static_cast<std::uint64_t>(chart->period_us());
  for (int r = 0; r < report.revolutions; ++r) {
    const auto frame = accumulate(report.events, report.measure_begin_us + static_cast<std::uint64_t>(r) * window,
                                  window, run.cfg.width, run.cfg.height);
    write_text(run.out / ("accumulation_" + std::to_string(r) + ".pgm"), encode_pgm(accumulation_to_image(frame)));
  }
  write_manifest(run);
  for (const auto& e : report.edges)
    std::cout << "edge " << e.contrast << " " << (e.polarity == Polarity::On ? "on" : "off") << " fraction "
              << e.fraction << " detected " << (e.detected ? 1 : 0) << "\n";
  std::cout << "noise_rate_hz " << report.noise_rate_hz << " noise_ok " << (report.noise_ok ? 1 : 0) << "\n";
}

struct BudgetOpts {
  double lux = 0.7;
  double fcut = 18.0;
  bool binned = false;
};

void cmd_budget(Run& run, const BudgetOpts& o) {
  resolve(run);
  run.out = make_out_dir(run.common.out_dir, run.command);
  const auto b = photon_budget(o.lux, o.fcut, run.cfg, o.binned);
  write_text(run.out / "budget.json", to_json(b).dump(2) + "\n");
  write_manifest(run);
  std::cout << std::setprecision(4) << "N " << b.photoelectrons / 1e3 << " ke- tau_s " << b.tau_s << " sigma_over_n ";
  if (b.sigma_over_n) std::cout << *b.sigma_over_n * 100 << " %";
  else std::cout << "undefined";
  std::cout << "\n";
}

struct ApsOpts {
  std::uint64_t t_us = 0;
  std::uint64_t exposure_us = 10'000;
};

void cmd_aps(Run& run, const ApsOpts& o) {
  resolve(run);
  const auto scene = load_scene(run);
  run.out = make_out_dir(run.common.out_dir, run.command);
  const auto frame = capture_aps(scene, o.t_us, o.exposure_us, run.cfg);
  write_text(run.out / "aps.pgm", encode_pgm(aps_to_image(frame)));
  write_manifest(run);
  std::cout << "aps -> " << (run.out / "aps.pgm").string() << "\n";
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "key = value config file (may hold scene.* keys)");
  sub->add_option("--scene", c.scene_path, "key = value scene file (scene.* keys)");
  sub->add_option("--out", c.out_dir, "output directory (default runs/<command>_<timestamp>)");
  sub->add_option("--workers", c.workers, "worker threads; results do not depend on it")->check(CLI::PositiveNumber);
  for (const auto& key : config_keys()) {
    auto* opt = sub->add_option_function<std::string>(
        "--" + key.name, [&c, name = key.name](const std::string& v) { c.overrides[name] = v; },
        key.help + " [" + key.units + "]");
    opt->group("Sensor config");
  }
}

int fail(int code, const char* kind, const std::string& message) {
  nlohmann::json j{{"error", kind}, {"code", code}, {"message", message}};
  std::cerr << j.dump() << "\n";
  return code;
}

int run_cli(std::vector<std::string> args);

int cmd_replay(const std::string& manifest_path, const std::string& out_dir) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw IoError("cannot read manifest " + manifest_path);
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  if (!m.contains("argv") || !m["argv"].is_array()) throw FormatError("manifest: missing argv");
  std::vector<std::string> args;
  const auto stored = m["argv"].get<std::vector<std::string>>();
  for (std::size_t i = 0; i < stored.size(); ++i) {
    if (stored[i] == "--out" && i + 1 < stored.size()) {
      ++i;
      continue;
    }
    if (stored[i].starts_with("--out=")) continue;
    args.push_back(stored[i]);
  }
  if (!out_dir.empty()) {
    args.push_back("--out");
    args.push_back(out_dir);
  }
  return run_cli(args);
}

int run_cli(std::vector<std::string> args) {
  CLI::App app{"Event-camera pixel simulator", "sdvs"};
  app.require_subcommand(1);
  Run run;
  run.args = args;

  auto* sim = app.add_subcommand("simulate", "simulate a scene and write the event stream");
  SimulateOpts sim_o;
  add_common(sim, run.common);
  sim->add_option("--duration-us", sim_o.duration_us, "simulated time [us]");
  sim->add_option("--format", sim_o.format, "csv or binary");

  auto* sc = app.add_subcommand("scurve", "measure an S-curve and the noise-corrected threshold");
  ScurveOpts sc_o;
  add_common(sc, run.common);
  sc->add_option("--contrasts", sc_o.contrasts, "comma-separated step contrasts [fraction]");
  sc->add_option("--trials", sc_o.trials, "trials per contrast");
  sc->add_option("--polarity", sc_o.polarity, "on or off");
  sc->add_option("--lux", sc_o.lux, "base chip illuminance [lux]");

  auto* no = app.add_subcommand("noise", "noise event rate sweep over illuminance or cutoff");
  NoiseOpts no_o;
  add_common(no, run.common);
  no->add_option("--sweep", no_o.sweep, "lux or fcut");
  no->add_option("--values", no_o.values, "comma-separated sweep values [lux or Hz]");
  no->add_option("--lux", no_o.lux, "illuminance for a cutoff sweep [lux]");
  no->add_option("--duration-us", no_o.duration_us, "measurement time per point [us]");

  auto* ch = app.add_subcommand("chart", "rotating-chart edge detection");
  ChartOpts ch_o;
  add_common(ch, run.common);
  ch->add_option("--revolutions", ch_o.revolutions, "measured revolutions");
  ch->add_option("--inner-radius", ch_o.inner, "annulus inner radius [fraction of inscribed radius]");
  ch->add_option("--outer-radius", ch_o.outer, "annulus outer radius [fraction of inscribed radius]");
  ch->add_option("--noise-limit-hz", ch_o.noise_limit, "noise budget [Hz/px]");

  auto* bu = app.add_subcommand("budget", "photon budget over one integration time");
  BudgetOpts bu_o;
  add_common(bu, run.common);
  bu->add_option("--lux", bu_o.lux, "chip illuminance [lux]");
  bu->add_option("--fcut", bu_o.fcut, "buffer cutoff [Hz]");
  bu->add_flag("--binned", bu_o.binned, "2x2 binning");

  auto* ap = app.add_subcommand("aps", "capture a 9-bit frame");
  ApsOpts ap_o;
  add_common(ap, run.common);
  ap->add_option("--t-us", ap_o.t_us, "exposure start [us]");
  ap->add_option("--exposure-us", ap_o.exposure_us, "exposure time [us]");

  auto* re = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  std::string manifest_path;
  std::string replay_out;
  re->add_option("manifest", manifest_path, "manifest.json of an earlier run")->required();
  re->add_option("--out", replay_out, "output directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kExitConfig, "usage", e.what());
  }

  if (re->parsed()) return cmd_replay(manifest_path, replay_out);
  run.command = app.get_subcommands().front()->get_name();
  if (sim->parsed()) cmd_simulate(run, sim_o);
  else if (sc->parsed()) cmd_scurve(run, sc_o);
  else if (no->parsed()) cmd_noise(run, no_o);
  else if (ch->parsed()) cmd_chart(run, ch_o);
  else if (bu->parsed()) cmd_budget(run, bu_o);
  else if (ap->parsed()) cmd_aps(run, ap_o);
  return 0;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : "; ") + s;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return run_cli(args);
  } catch (const ConfigError& e) {
    return fail(kExitConfig, "config", join(e.violations()));
  } catch (const IoError& e) {
    return fail(kExitIo, "io", e.what());
  } catch (const FormatError& e) {
    return fail(kExitIo, "format", e.what());
  } catch (const PreconditionError& e) {
    return fail(kExitPrecondition, "precondition", e.what());
  } catch (const std::exception& e) {
    return fail(1, "internal", e.what());
  }
}
