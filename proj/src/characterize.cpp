#include "scidvs/characterize.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "scidvs/pixel.hpp"

namespace scidvs {

namespace {

std::uint64_t round_up_to_step(double us, std::uint64_t dt_us) {
  const auto steps = static_cast<std::uint64_t>(std::ceil(us / static_cast<double>(dt_us)));
  return std::max<std::uint64_t>(steps, 1) * dt_us;
}

double tau_us(const SensorConfig& cfg) { return integration_time_s(cfg.f_cut_hz) * 1e6; }

std::uint64_t warmup_us(const SensorConfig& cfg) { return round_up_to_step(5.0 * tau_us(cfg), cfg.dt_us); }

const char* polarity_name(Polarity p) { return p == Polarity::On ? "on" : "off"; }

std::string csv_number(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

double integration_time_s(double f_cut_hz) { return 1.0 / (2.0 * std::numbers::pi * f_cut_hz); }

StepTiming default_step_timing(const SensorConfig& cfg) {
  StepTiming t;
  const double tau = tau_us(cfg);
  t.warmup_us = round_up_to_step(5.0 * tau, cfg.dt_us);
  t.pulse_us = round_up_to_step(10.0 * tau, cfg.dt_us);
  t.settle_us = round_up_to_step(10.0 * tau + static_cast<double>(cfg.refractory_us), cfg.dt_us);
  return t;
}

StepProtocol step_scene(double base_lux, double signed_contrast, const StepTiming& timing) {
  StepProtocol s;
  s.base_lux = base_lux;
  s.reset_contrast = timing.reset_contrast;
  s.test_contrast = signed_contrast;
  s.t_reset_us = timing.warmup_us;
  s.reset_duration_us = timing.pulse_us;
  s.t_test_us = timing.t_test_us();
  s.t_window_us = timing.window_us;
  return s;
}

SCurve measure_s_curve(const SensorConfig& cfg, const std::vector<double>& contrasts, double base_lux, int trials,
                       Polarity polarity, unsigned workers, std::optional<StepTiming> timing) {
  validate_config(cfg);
  if (contrasts.empty()) throw PreconditionError("measure_s_curve: contrast list is empty");
  if (trials < 1) throw PreconditionError("measure_s_curve: trials must be >= 1");
  if (!(base_lux >= 0)) throw PreconditionError("measure_s_curve: base_lux must be >= 0");
  for (std::size_t i = 0; i < contrasts.size(); ++i) {
    if (!(contrasts[i] >= 0 && contrasts[i] < 1))
      throw PreconditionError("measure_s_curve: contrasts must lie in [0, 1)");
    if (i > 0 && !(contrasts[i] > contrasts[i - 1]))
      throw PreconditionError("measure_s_curve: contrasts must be strictly increasing");
  }
  std::vector<double> grid = contrasts;
  if (grid.front() != 0.0) grid.insert(grid.begin(), 0.0);

  const StepTiming tm = timing.value_or(default_step_timing(cfg));
  const std::uint64_t t_test = tm.t_test_us();
  const std::uint64_t t_end = t_test + tm.window_us;

  SCurve curve;
  curve.polarity = polarity;
  curve.base_lux = base_lux;

  for (std::size_t ci = 0; ci < grid.size(); ++ci) {
    SceneSpec scene{step_scene(base_lux, sign(polarity) * grid[ci], tm), {}};
    validate_scene(scene);
    std::uint64_t correct = 0;
    std::uint64_t wrong = 0;
    std::uint64_t pairs = 0;
    for (int trial = 0; trial < trials; ++trial) {
      PixelArray array(cfg, (static_cast<std::uint64_t>(ci) << 32) | static_cast<std::uint64_t>(trial));
      array.initialize(scene, 0);
      array.advance_to(scene, t_test, workers);
      array.reset_detectors();
      const auto events = array.advance_to(scene, t_end, workers);

      const auto n = static_cast<std::size_t>(cfg.width) * static_cast<std::size_t>(cfg.height);
      std::vector<std::uint8_t> hit(n, 0);
      for (const auto& e : events) {
        const auto i = static_cast<std::size_t>(e.y) * static_cast<std::size_t>(cfg.width) + e.x;
        hit[i] |= e.polarity == polarity ? 1 : 2;
      }
      for (int y = 0; y < cfg.height; ++y) {
        for (int x = 0; x < cfg.width; ++x) {
          if (!array.emits_events(x, y)) continue;
          const auto h = hit[static_cast<std::size_t>(y) * static_cast<std::size_t>(cfg.width) + static_cast<std::size_t>(x)];
          correct += (h & 1) ? 1 : 0;
          wrong += (h & 2) ? 1 : 0;
          ++pairs;
        }
      }
    }
    SCurvePoint p;
    p.contrast = grid[ci];
    p.trials = pairs;
    p.fraction = static_cast<double>(correct) / static_cast<double>(pairs);
    p.wrong_fraction = static_cast<double>(wrong) / static_cast<double>(pairs);
    curve.points.push_back(p);
  }
  return curve;
}

std::optional<double> estimate_nct(const SCurve& curve) {
  const auto& pts = curve.points;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].fraction < kDetectionFraction) continue;
    if (i == 0) return pts[0].contrast;
    const auto& a = pts[i - 1];
    const auto& b = pts[i];
    return a.contrast + (kDetectionFraction - a.fraction) * (b.contrast - a.contrast) / (b.fraction - a.fraction);
  }
  return std::nullopt;
}

double nominal_nct(const SensorConfig& cfg, Polarity polarity) {
  const double theta = polarity == Polarity::On ? cfg.theta_on : cfg.theta_off;
  return std::expm1(theta / cfg.effective_gain());
}

// ---------------------------------------------------------------------------

double NoisePoint::rate_sigma() const {
  const double exposure = static_cast<double>(active_pixels) * duration_s;
  return exposure > 0 ? std::sqrt(static_cast<double>(std::max<std::uint64_t>(events, 1))) / exposure : 0.0;
}

NoisePoint measure_noise_rate(const SensorConfig& cfg, double lux, std::uint64_t duration_us, unsigned workers,
                              std::uint64_t noise_salt) {
  if (duration_us == 0) throw PreconditionError("noise measurement: duration must be > 0");
  if (!(lux >= 0)) throw PreconditionError("noise measurement: lux must be >= 0");
  PixelArray array(cfg, noise_salt);
  const SceneSpec scene{ConstantScene{lux}, {}};
  array.initialize(scene, 0);
  const auto warm = warmup_us(array.config());
  array.advance_to(scene, warm, workers);
  const auto events = array.advance_to(scene, warm + duration_us, workers);

  NoisePoint p;
  p.value = lux;
  p.events = events.size();
  p.active_pixels = array.active_pixels();
  p.duration_s = static_cast<double>(array.now_us() - warm) * 1e-6;
  p.rate_hz = static_cast<double>(p.events) / (static_cast<double>(p.active_pixels) * p.duration_s);
  return p;
}

IlluminanceSweep noise_sweep_illuminance(const SensorConfig& cfg, const std::vector<double>& lux_list,
                                         std::uint64_t duration_us, unsigned workers) {
  SensorConfig binned = cfg;
  binned.binning_enabled = true;
  binned.force_reset = true;
  SensorConfig plain = cfg;
  plain.binning_enabled = false;
  plain.force_reset = false;

  IlluminanceSweep out;
  out.binned = {"lux", true, {}};
  out.unbinned = {"lux", false, {}};
  for (std::size_t i = 0; i < lux_list.size(); ++i) {
    out.binned.points.push_back(measure_noise_rate(binned, lux_list[i], duration_us, workers, i));
    out.unbinned.points.push_back(measure_noise_rate(plain, lux_list[i], duration_us, workers, i));
  }
  return out;
}

SensorConfig with_fcut(const SensorConfig& cfg, double f_cut_hz) {
  SensorConfig c = cfg;
  c.f_cut_hz = f_cut_hz;
  if (f_cut_hz > 0) {
    const auto limit = static_cast<std::uint64_t>(std::floor(max_dt_us(f_cut_hz)));
    c.dt_us = std::max<std::uint64_t>(1, std::min(c.dt_us, limit));
  }
  return c;
}

NoiseSweepResult noise_sweep_fcut(const SensorConfig& cfg, const std::vector<double>& fcut_list, double lux,
                                  std::uint64_t duration_us, unsigned workers) {
  NoiseSweepResult out{"f_cut_hz", cfg.binning_enabled, {}};
  for (std::size_t i = 0; i < fcut_list.size(); ++i) {
    auto p = measure_noise_rate(with_fcut(cfg, fcut_list[i]), lux, duration_us, workers, i);
    p.value = fcut_list[i];
    out.points.push_back(p);
  }
  return out;
}

ThresholdTuning tune_threshold(const SensorConfig& cfg, const std::vector<double>& thetas, double lux,
                               std::uint64_t duration_us, double max_rate_hz, unsigned workers) {
  ThresholdTuning out;
  out.thetas = thetas;
  std::sort(out.thetas.begin(), out.thetas.end());
  for (const double theta : out.thetas) {
    SensorConfig c = cfg;
    c.theta_on = theta;
    c.theta_off = theta;
    auto p = measure_noise_rate(c, lux, duration_us, workers);
    p.value = theta;
    out.rates.push_back(p);
    if (p.rate_hz < max_rate_hz) {
      out.chosen = theta;
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

ChartReport chart_detection(const SensorConfig& cfg, const RotatingChart& chart, const ChartOptions& options,
                            unsigned workers) {
  validate_config(cfg);
  const SceneSpec scene = validate_scene(SceneSpec{chart, {}});
  if (options.revolutions < 1) throw PreconditionError("chart_detection: need at least one measured revolution");

  const double period = chart.period_us();
  const int revs = options.revolutions;
  const std::size_t nw = chart.wedges.size();
  const double dwell = period / static_cast<double>(nw);
  const auto t_end = static_cast<std::uint64_t>(std::ceil(period * (revs + 2) + dwell));

  PixelArray array(cfg);
  array.initialize(scene, 0);
  auto events = array.advance_to(scene, t_end, workers);

  // A pixel's footprint is its bin group when binning, else the pixel. Events
  // count towards a test edge only while the whole footprint sits in that
  // edge's test sector; pixels whose footprint spans more than half a test
  // sector are left out.
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double test_angle = two_pi * chart.test_fraction() / static_cast<double>(nw);
  const int foot = cfg.binning_enabled ? 2 : 1;
  const double inscribed = 0.5 * std::min(cfg.width, cfg.height);
  const double r_in = options.inner_radius * inscribed;
  const double r_out = options.outer_radius * inscribed;
  const auto n_pix = static_cast<std::size_t>(cfg.width) * static_cast<std::size_t>(cfg.height);
  std::vector<std::uint8_t> in_annulus(n_pix, 0);
  std::vector<double> lead(n_pix, 0.0);
  std::vector<double> trail(n_pix, 0.0);
  int pixels = 0;
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      const double r = std::hypot(x - chart.center_x, y - chart.center_y);
      if (r < r_in || r > r_out || !array.emits_events(x, y)) continue;
      const auto g = cfg.binning_enabled ? bin_group_of(x, y) : BinGroup{x, y};
      const double cx = g.x0 + 0.5 * (foot - 1) - chart.center_x;
      const double cy = g.y0 + 0.5 * (foot - 1) - chart.center_y;
      double phi = std::atan2(cy, cx);
      if (phi < 0) phi += two_pi;
      double lo = 0;
      double hi = 0;
      for (const double dx : {-0.5, foot - 0.5}) {
        for (const double dy : {-0.5, foot - 0.5}) {
          const double corner = std::atan2(g.y0 + dy - chart.center_y, g.x0 + dx - chart.center_x);
          const double d = std::remainder(corner - phi, two_pi);
          lo = std::min(lo, d);
          hi = std::max(hi, d);
        }
      }
      if (hi - lo > 0.5 * test_angle) continue;
      const auto i = static_cast<std::size_t>(y) * static_cast<std::size_t>(cfg.width) + static_cast<std::size_t>(x);
      in_annulus[i] = 1;
      trail[i] = phi + lo;
      lead[i] = phi + hi;
      ++pixels;
    }
  }
  if (pixels == 0) throw PreconditionError("chart_detection: measurement annulus contains no usable pixels");

  // Revolutions 2 .. revs+1 of every pixel lie inside [period, t_end).
  const std::size_t slots = static_cast<std::size_t>(revs) * nw;
  std::vector<std::uint8_t> flags(n_pix * slots, 0);
  std::uint64_t annulus_events = 0;
  const auto measure_begin = static_cast<std::uint64_t>(std::ceil(2 * period));
  const auto measure_end = static_cast<std::uint64_t>(std::floor(period * (revs + 2)));
  for (const auto& e : events) {
    const auto i = static_cast<std::size_t>(e.y) * static_cast<std::size_t>(cfg.width) + e.x;
    if (!in_annulus[i]) continue;
    if (e.t_us >= measure_begin && e.t_us < measure_end) ++annulus_events;
    const auto a = chart_phase_at(chart, trail[i], e.t_us);
    const auto b = chart_phase_at(chart, lead[i], e.t_us);
    if (a.sector != ChartSector::Test || b.sector != ChartSector::Test) continue;
    if (a.wedge != b.wedge || a.revolution != b.revolution) continue;
    if (a.revolution < 2 || a.revolution > revs + 1) continue;
    const auto slot = static_cast<std::size_t>(a.revolution - 2) * nw + static_cast<std::size_t>(a.wedge);
    flags[i * slots + slot] |= e.polarity == chart.wedges[static_cast<std::size_t>(a.wedge)].polarity ? 1 : 2;
  }

  ChartReport report;
  report.pixels = pixels;
  report.revolutions = revs;
  report.measure_begin_us = measure_begin;
  report.noise_limit_hz = options.noise_limit_hz;
  for (std::size_t k = 0; k < nw; ++k) {
    ChartEdgeResult edge;
    edge.contrast = chart.wedges[k].contrast;
    edge.polarity = chart.wedges[k].polarity;
    for (std::size_t i = 0; i < n_pix; ++i) {
      if (!in_annulus[i]) continue;
      for (int r = 0; r < revs; ++r) {
        const auto f = flags[i * slots + static_cast<std::size_t>(r) * nw + k];
        ++edge.visits;
        edge.responses += (f & 1) ? 1 : 0;
        edge.wrong += (f & 2) ? 1 : 0;
      }
    }
    edge.fraction = static_cast<double>(edge.responses) / static_cast<double>(edge.visits);
    edge.detected = edge.fraction >= kDetectionFraction;
    report.edges.push_back(edge);
  }
  report.events_per_pixel_s =
      static_cast<double>(annulus_events) / (static_cast<double>(pixels) * static_cast<double>(measure_end - measure_begin) * 1e-6);

  const auto noise = measure_noise_rate(cfg, chart.base_lux, static_cast<std::uint64_t>(std::ceil(period * revs)),
                                        workers, 0xC0FFEEull);
  report.noise_rate_hz = noise.rate_hz;
  report.noise_ok = noise.rate_hz < options.noise_limit_hz;
  report.events = std::move(events);
  return report;
}

// ---------------------------------------------------------------------------

ResonanceProbe stochastic_resonance_probe(const SensorConfig& cfg, double contrast, Polarity polarity, int trials,
                                          double base_lux, unsigned workers) {
  if (!(contrast > 0)) throw PreconditionError("stochastic_resonance_probe: contrast must be > 0");
  SensorConfig noisy = cfg;
  if (noisy.noise_mode == NoiseMode::Off) noisy.noise_mode = NoiseMode::PoissonPlusBuffer;
  SensorConfig quiet = cfg;
  quiet.noise_mode = NoiseMode::Off;

  const auto on = measure_s_curve(noisy, {contrast}, base_lux, trials, polarity, workers);
  const auto off = measure_s_curve(quiet, {contrast}, base_lux, 1, polarity, workers);
  ResonanceProbe probe;
  probe.contrast = contrast;
  probe.p_noise_on = on.points.back().fraction;
  probe.wrong_noise_on = on.points.back().wrong_fraction;
  probe.p_noise_off = off.points.back().fraction;
  probe.wrong_noise_off = off.points.back().wrong_fraction;
  probe.trials = on.points.back().trials;
  return probe;
}

// ---------------------------------------------------------------------------

BudgetReport photon_budget(double lux, double f_cut_hz, const SensorConfig& cfg, bool binned) {
  if (!(lux >= 0)) throw PreconditionError("photon_budget: lux must be >= 0");
  if (!(f_cut_hz > 0)) throw PreconditionError("photon_budget: f_cut must be > 0");
  BudgetReport r;
  r.lux = lux;
  r.f_cut_hz = f_cut_hz;
  r.tau_s = integration_time_s(f_cut_hz);
  r.photoelectrons = photoelectron_rate(lux, cfg, binned) * r.tau_s;
  if (r.photoelectrons > 0) {
    r.sigma_over_n = std::sqrt(cfg.noise_factor / r.photoelectrons);
    for (const int k : {1, 2, 4}) r.k_sigma_contrasts.emplace_back(k, k * *r.sigma_over_n);
  }
  return r;
}

double rose_required_photons(double contrast, double k_sigma) {
  if (!(contrast > 0 && contrast < 1)) throw PreconditionError("rose_required_photons: contrast must lie in (0, 1)");
  if (!(k_sigma > 0)) throw PreconditionError("rose_required_photons: k must be > 0");
  return 2.0 * k_sigma * k_sigma / (contrast * contrast);
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const SCurve& curve) {
  nlohmann::json j;
  j["polarity"] = polarity_name(curve.polarity);
  j["base_lux"] = curve.base_lux;
  j["points"] = nlohmann::json::array();
  for (const auto& p : curve.points)
    j["points"].push_back(
        {{"contrast", p.contrast}, {"fraction", p.fraction}, {"wrong_fraction", p.wrong_fraction}, {"trials", p.trials}});
  const auto nct = estimate_nct(curve);
  j["nct"] = nct ? nlohmann::json(*nct) : nlohmann::json("not reached");
  return j;
}

nlohmann::json to_json(const NoiseSweepResult& sweep) {
  nlohmann::json j;
  j["swept"] = sweep.swept;
  j["binning"] = sweep.binning;
  j["points"] = nlohmann::json::array();
  for (const auto& p : sweep.points)
    j["points"].push_back({{"value", p.value},
                           {"rate_hz", p.rate_hz},
                           {"rate_sigma_hz", p.rate_sigma()},
                           {"events", p.events},
                           {"active_pixels", p.active_pixels},
                           {"duration_s", p.duration_s}});
  return j;
}

nlohmann::json to_json(const ChartReport& report) {
  nlohmann::json j;
  j["pixels"] = report.pixels;
  j["revolutions"] = report.revolutions;
  j["noise_rate_hz"] = report.noise_rate_hz;
  j["noise_limit_hz"] = report.noise_limit_hz;
  j["noise_ok"] = report.noise_ok;
  j["events_per_pixel_s"] = report.events_per_pixel_s;
  j["edges"] = nlohmann::json::array();
  for (const auto& e : report.edges)
    j["edges"].push_back({{"contrast", e.contrast},
                          {"polarity", polarity_name(e.polarity)},
                          {"visits", e.visits},
                          {"responses", e.responses},
                          {"wrong", e.wrong},
                          {"fraction", e.fraction},
                          {"detected", e.detected}});
  return j;
}

nlohmann::json to_json(const BudgetReport& report) {
  nlohmann::json j;
  j["lux"] = report.lux;
  j["f_cut_hz"] = report.f_cut_hz;
  j["tau_s"] = report.tau_s;
  j["photoelectrons"] = report.photoelectrons;
  j["sigma_over_n"] = report.sigma_over_n ? nlohmann::json(*report.sigma_over_n) : nlohmann::json("undefined");
  j["k_sigma_contrasts"] = nlohmann::json::array();
  for (const auto& [k, c] : report.k_sigma_contrasts) j["k_sigma_contrasts"].push_back({{"k", k}, {"contrast", c}});
  return j;
}

nlohmann::json to_json(const ResonanceProbe& probe) {
  return {{"contrast", probe.contrast},          {"p_noise_on", probe.p_noise_on},
          {"p_noise_off", probe.p_noise_off},    {"wrong_noise_on", probe.wrong_noise_on},
          {"wrong_noise_off", probe.wrong_noise_off}, {"trials", probe.trials}};
}

std::string to_csv(const SCurve& curve) {
  std::ostringstream os;
  os << "contrast,fraction,wrong_fraction,trials\n";
  for (const auto& p : curve.points)
    os << csv_number(p.contrast) << ',' << csv_number(p.fraction) << ',' << csv_number(p.wrong_fraction) << ','
       << p.trials << '\n';
  return os.str();
}

std::string to_csv(const NoiseSweepResult& sweep) {
  std::ostringstream os;
  os << sweep.swept << ",binning,rate_hz,rate_sigma_hz,events,active_pixels,duration_s\n";
  for (const auto& p : sweep.points)
    os << csv_number(p.value) << ',' << (sweep.binning ? 1 : 0) << ',' << csv_number(p.rate_hz) << ','
       << csv_number(p.rate_sigma()) << ',' << p.events << ',' << p.active_pixels << ',' << csv_number(p.duration_s)
       << '\n';
  return os.str();
}

std::string to_csv(const ChartReport& report) {
  std::ostringstream os;
  os << "contrast,polarity,visits,responses,wrong,fraction,detected\n";
  for (const auto& e : report.edges)
    os << csv_number(e.contrast) << ',' << polarity_name(e.polarity) << ',' << e.visits << ',' << e.responses << ','
       << e.wrong << ',' << csv_number(e.fraction) << ',' << (e.detected ? 1 : 0) << '\n';
  return os.str();
}

}  // namespace scidvs
