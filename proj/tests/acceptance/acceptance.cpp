// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. All tolerances are fixed here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "../scalar_pixel.hpp"
#include "scidvs/characterize.hpp"
#include "scidvs/pixel.hpp"
#include "scidvs/readout.hpp"

using namespace scidvs;

namespace {

constexpr unsigned kWorkers = 1;

void note(const char* fmt, auto... args) {
  std::printf("    ");
  std::printf(fmt, args...);
  std::printf("\n");
}

bool within(double value, double target, double rel) { return std::abs(value - target) <= rel * std::abs(target); }

// Photoelectrons per step at 1 lux for a 30 um pixel, QE 0.5, dt 100 us.
constexpr double kCountPerLuxStep = 1e4 * 0.5 * 900.0 * 1e-4;

std::vector<double> grid(double from, double to, double step) {
  std::vector<double> v;
  for (int i = 0; from + i * step <= to + 1e-12; ++i) v.push_back(from + i * step);
  return v;
}

// --- 1 ------------------------------------------------------------------------

bool photon_budget_exact() {
  const SensorConfig cfg;
  const auto a = photon_budget(0.7, 18, cfg, true);
  const auto b = photon_budget(0.012, 3.5, cfg, true);
  note("0.7 lux 18 Hz binned: N %.4g, sigma/N %.4f %%", a.photoelectrons, 100 * *a.sigma_over_n);
  note("0.012 lux 3.5 Hz binned: N %.4g, sigma/N %.4f %%", b.photoelectrons, 100 * *b.sigma_over_n);
  return within(a.photoelectrons, 1.10e5, 0.02) && within(*a.sigma_over_n, 0.0043, 0.02) &&
         within(b.photoelectrons, 1.0e4, 0.03) && within(*b.sigma_over_n, 0.014, 0.03);
}

// --- 2 ------------------------------------------------------------------------

bool noise_floor_calibration() {
  struct Point {
    double lux, f_cut;
    std::uint64_t dt_us, duration_us;
  };
  const Point points[] = {{0.01, 3.5, 10'000, 6'000'000}, {1.0, 18, 100, 1'500'000}, {40.0, 200, 250, 300'000}};
  bool ok = true;
  for (const auto& p : points) {
    SensorConfig cfg;
    cfg.width = cfg.height = 32;
    cfg.f_cut_hz = p.f_cut;
    cfg.dt_us = p.dt_us;
    cfg.theta_on = cfg.theta_off = 100;  // events are irrelevant here
    const double tau_s = 1 / (2 * std::numbers::pi * p.f_cut);
    const double n = p.lux * 4.5e6 * tau_s;
    const double expected = 2.0 / n;
    PixelArray a(cfg);
    const SceneSpec scene{ConstantScene{p.lux}, {}};
    a.initialize(scene, 0);
    a.advance_to(scene, static_cast<std::uint64_t>(10 * tau_s * 1e6));
    a.track_signal_stats(true);
    a.advance_to(scene, a.now_us() + p.duration_us);
    double var = 0;
    for (int y = 0; y < cfg.height; ++y)
      for (int x = 0; x < cfg.width; ++x) var += a.signal_stats(x, y).variance();
    var /= cfg.width * cfg.height;
    const bool pass = within(var, expected, 0.10);
    note("%.2f lux, %.1f Hz: N %.4g, Var %.4g, 2/N %.4g, ratio %.3f%s", p.lux, p.f_cut, n, var, expected,
         var / expected, pass ? "" : "  <-");
    ok &= pass;
  }
  return ok;
}

// --- 3 ------------------------------------------------------------------------

bool deterministic_nct() {
  SensorConfig cfg;
  cfg.width = cfg.height = 32;
  cfg.noise_mode = NoiseMode::Off;
  const double step = 0.00025;
  const auto contrasts = grid(0.0150, 0.0200, step);
  const auto curve = measure_s_curve(cfg, contrasts, 40, 1, Polarity::On, kWorkers);
  const double nominal = std::expm1(0.119 / 7);
  bool ok = curve.points.front().fraction == 0 && curve.points.front().wrong_fraction == 0;
  double first_full = -1;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& pt = curve.points[i];
    // Brute-force oracle: the step fires iff gain * ln(1 + C) reaches theta.
    const double expected = 7 * std::log1p(pt.contrast) >= 0.119 ? 1.0 : 0.0;
    if (pt.fraction != expected) {
      ok = false;
      note("C %.4f %%: fraction %.3f, oracle %.0f  <-", 100 * pt.contrast, pt.fraction, expected);
    }
    if (first_full < 0 && pt.fraction == 1.0) first_full = pt.contrast;
  }
  const auto nct = estimate_nct(curve);
  note("step at %.4f %%, nct %.4f %%, exp(theta/gain) - 1 = %.4f %%, grid %.3f %%", 100 * first_full,
       nct ? 100 * *nct : -1.0, 100 * nominal, 100 * step);
  ok &= first_full > 0 && std::abs(first_full - 0.01715) <= step + 1e-12;
  ok &= nct && std::abs(*nct - nominal) <= step;
  return ok;
}

// --- 4 ------------------------------------------------------------------------

bool s_curve_monotone() {
  SensorConfig cfg;
  cfg.binning_enabled = true;
  cfg.force_reset = true;
  cfg.mismatch_sigma = 0.1;
  const auto contrasts = grid(0.002, 0.040, 0.002);
  bool ok = true;
  for (auto pol : {Polarity::On, Polarity::Off}) {
    const auto curve = measure_s_curve(cfg, contrasts, 40, 1, pol, kWorkers);
    const auto& pts = curve.points;
    const double control = pts.front().fraction;
    bool mono = true;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const double n = static_cast<double>(pts[i].trials);
      const double p = 0.5 * (pts[i].fraction + pts[i + 1].fraction);
      const double sigma = std::sqrt(2 * std::max(p * (1 - p), 1.0 / n) / n);
      if (pts[i + 1].fraction < pts[i].fraction - 3 * sigma) mono = false;
    }
    const auto nct = estimate_nct(curve);
    note("%s: %zu points, %llu pairs each, control %.4f, wrong at control %.4f, nct %.3f %%, monotone %s",
         pol == Polarity::On ? "ON" : "OFF", pts.size() - 1, static_cast<unsigned long long>(pts.front().trials),
         control, pts.front().wrong_fraction, nct ? 100 * *nct : -1.0, mono ? "yes" : "no");
    ok &= mono && control < 0.01;
  }
  return ok;
}

// --- 5 ------------------------------------------------------------------------

std::optional<double> nct_at(SensorConfig cfg, const std::vector<double>& contrasts) {
  return estimate_nct(measure_s_curve(cfg, contrasts, 40, 2, Polarity::On, kWorkers));
}

bool preamp_ratio() {
  SensorConfig base;
  base.width = base.height = 16;

  // Identical theta, noise off.
  auto on = base;
  on.noise_mode = NoiseMode::Off;
  auto off = on;
  off.preamp_enabled = false;
  const auto n_on = nct_at(on, grid(0.015, 0.020, 0.00025));
  const auto n_off = nct_at(off, grid(0.11, 0.14, 0.002));
  const double expected = std::expm1(0.119) / std::expm1(0.119 / 7);
  const double r1 = n_on && n_off ? *n_off / *n_on : 0.0;
  note("identical theta: nct %.4f %% / %.4f %%, ratio %.3f (algebra %.3f)", n_off ? 100 * *n_off : -1.0,
       n_on ? 100 * *n_on : -1.0, r1, expected);

  // Mismatch on; the bypassed mode runs 1.5x theta to keep hot pixels quiet.
  auto mm_on = base;
  mm_on.mismatch_sigma = 0.1;
  auto mm_off = mm_on;
  mm_off.preamp_enabled = false;
  mm_off.theta_on = mm_off.theta_off = 1.5 * 0.119;
  const auto m_on = nct_at(mm_on, grid(0.005, 0.030, 0.001));
  const auto m_off = nct_at(mm_off, grid(0.10, 0.30, 0.005));
  const double r2 = m_on && m_off ? *m_off / *m_on : 0.0;
  note("mismatch 0.1, bypass theta x1.5: nct %.3f %% / %.3f %%, ratio %.2f (algebra %.2f)",
       m_off ? 100 * *m_off : -1.0, m_on ? 100 * *m_on : -1.0, r2, std::expm1(1.5 * 0.119) / std::expm1(0.119 / 7));
  return r1 >= 6 && r1 <= 8 && r2 > 10;
}

// --- 6 ------------------------------------------------------------------------

struct OracleRate {
  double rate_hz;
  std::uint64_t events;
};

OracleRate scalar_noise_rate(const oracle::PixelParams& p, double mu, int pixels, double seconds, std::uint64_t seed) {
  const auto warm = static_cast<std::uint64_t>(5e6 / (2 * std::numbers::pi * p.f_cut_hz));
  const auto end = warm + static_cast<std::uint64_t>(seconds * 1e6);
  std::uint64_t events = 0;
  for (int k = 0; k < pixels; ++k) {
    oracle::NoisyInput in(p, seed + static_cast<std::uint64_t>(k));
    oracle::ScalarPixel px(p, std::log(mu));
    for (std::uint64_t t = 0; t < end; t += p.dt_us) {
      const int e = px.step(in(mu), t);
      if (e != 0 && t >= warm) ++events;
    }
  }
  return {static_cast<double>(events) / (pixels * seconds), events};
}

bool binning_noise_reduction() {
  SensorConfig cfg;
  cfg.width = cfg.height = 32;
  cfg.theta_on = cfg.theta_off = 7 * std::log(1.05);
  const std::vector<double> lux{0.03, 0.06, 0.1};
  const auto sweep = noise_sweep_illuminance(cfg, lux, 2'000'000, kWorkers);
  bool ok = true;
  for (std::size_t i = 0; i < lux.size(); ++i) {
    const auto& b = sweep.binned.points[i];
    const auto& u = sweep.unbinned.points[i];
    const bool lower = b.rate_hz < u.rate_hz;
    note("%.2f lux: binned %.4g Hz/px (%llu ev, %d px), unbinned %.4g Hz/px (%llu ev, %d px)%s", lux[i], b.rate_hz,
         static_cast<unsigned long long>(b.events), b.active_pixels, u.rate_hz,
         static_cast<unsigned long long>(u.events), u.active_pixels, lower ? "" : "  <-");
    ok &= lower;
  }
  const auto& bm = sweep.binned.points[1];
  const auto& um = sweep.unbinned.points[1];
  const double factor = um.rate_hz / std::max(bm.rate_hz, 1e-300);

  // Independent estimate of the same factor from the scalar model.
  oracle::PixelParams p;
  p.theta_on = p.theta_off = cfg.theta_on;
  const double mu = lux[1] * kCountPerLuxStep;
  const auto ob = scalar_noise_rate(p, 4 * mu, 256, 2.0, 0x5EED);
  const auto ou = scalar_noise_rate(p, mu, 128, 2.0, 0xBEEF);
  const double oracle_factor = ou.rate_hz / std::max(ob.rate_hz, 1e-300);
  const double tol = 3 * std::sqrt(1.0 / std::max<double>(bm.events, 1) + 1.0 / std::max<double>(um.events, 1) +
                                   1.0 / std::max<double>(ob.events, 1) + 1.0 / std::max<double>(ou.events, 1));
  const bool agree = std::abs(std::log(factor / oracle_factor)) <= tol;
  note("mid point factor %.1f, scalar oracle %.1f (binned %.4g Hz, unbinned %.4g Hz), log tolerance %.3f%s", factor,
       oracle_factor, ob.rate_hz, ou.rate_hz, tol, agree ? "" : "  <-");
  return ok && factor >= 10 && agree;
}

// --- 7 ------------------------------------------------------------------------

bool fcut_noise_trade() {
  SensorConfig cfg;
  cfg.width = cfg.height = 32;
  cfg.theta_on = cfg.theta_off = 7 * std::log(1.02);
  const auto sweep = noise_sweep_fcut(cfg, {3.5, 10, 18, 50, 200}, 0.21, 2'000'000, kWorkers);
  bool mono = true;
  for (std::size_t i = 0; i < sweep.points.size(); ++i) {
    const auto& p = sweep.points[i];
    note("%6.1f Hz: %.4g Hz/px (%llu events)", p.value, p.rate_hz, static_cast<unsigned long long>(p.events));
    if (i > 0) {
      const auto& q = sweep.points[i - 1];
      if (p.rate_hz < q.rate_hz - 3 * std::hypot(p.rate_sigma(), q.rate_sigma())) mono = false;
    }
  }
  const double ratio = sweep.points.back().rate_hz / std::max(sweep.points.front().rate_hz, 1e-300);
  note("rate(200) / rate(3.5) = %.1f, monotone %s", ratio, mono ? "yes" : "no");
  return ratio >= 100 && mono;
}

// --- 8 ------------------------------------------------------------------------

bool chart_band() {
  SensorConfig cfg;
  cfg.width = cfg.height = 32;
  cfg.binning_enabled = true;
  cfg.force_reset = true;
  const double lux = 0.7;
  std::vector<double> thetas;
  for (int i = 5; i <= 30; ++i) thetas.push_back(7 * std::log1p(i * 0.001));
  const auto tuning = tune_threshold(cfg, thetas, lux, 1'000'000, kChartNoiseLimitHz, kWorkers);
  if (!tuning.chosen) {
    note("no threshold keeps the noise under %.0f Hz/px", kChartNoiseLimitHz);
    return false;
  }
  cfg.theta_on = cfg.theta_off = *tuning.chosen;
  note("tuned theta %.4f (%.2f %% equivalent), noise %.3g Hz/px", *tuning.chosen,
       100 * std::expm1(*tuning.chosen / 7), tuning.rates.back().rate_hz);

  const double sigma = *photon_budget(lux, cfg.f_cut_hz, cfg, true).sigma_over_n;
  const std::vector<double> contrasts{0.006, 0.008, 0.011, 0.014, 0.017, 0.020, 0.026, 0.032, 0.039};
  std::vector<bool> both;
  bool noise_ok = true;
  for (double c : contrasts) {
    const auto chart = centered_chart(cfg, lux, {{c, Polarity::On}, {c, Polarity::Off}});
    const auto r = chart_detection(cfg, chart, {}, kWorkers);
    both.push_back(r.edges[0].detected && r.edges[1].detected);
    noise_ok &= r.noise_ok;
    note("C %.1f %%: ON %.3f, OFF %.3f of %llu visits, noise %.3g Hz/px", 100 * c, r.edges[0].fraction,
         r.edges[1].fraction, static_cast<unsigned long long>(r.edges[0].visits), r.noise_rate_hz);
  }
  // Smallest contrast from which every larger one is detected in both polarities.
  std::optional<double> min_c;
  for (std::size_t i = contrasts.size(); i-- > 0;) {
    if (!both[i]) break;
    min_c = contrasts[i];
  }
  const double lo = 2 * sigma, hi = 6 * sigma;
  note("sigma/N %.3f %%, band [%.2f %%, %.2f %%], minimum detected %.2f %% (%.1f sigma)", 100 * sigma, 100 * lo,
       100 * hi, min_c ? 100 * *min_c : -1.0, min_c ? *min_c / sigma : -1.0);
  return noise_ok && min_c && *min_c >= lo && *min_c <= hi;
}

// --- 9 ------------------------------------------------------------------------

bool stochastic_resonance() {
  SensorConfig plain;
  plain.width = plain.height = 32;
  auto binned = plain;
  binned.binning_enabled = true;
  binned.force_reset = true;
  const double lux = 1.0;
  const double c = 0.8 * nominal_nct(plain, Polarity::On);
  const auto pu = stochastic_resonance_probe(plain, c, Polarity::On, 2, lux, kWorkers);
  const auto pb = stochastic_resonance_probe(binned, c, Polarity::On, 2, lux, kWorkers);
  const auto nu = measure_noise_rate(plain, lux, 1'000'000, kWorkers);
  const auto nb = measure_noise_rate(binned, lux, 1'000'000, kWorkers);
  note("C %.4f %%: unbinned P %.3f (off %.3f), noise %.3g Hz/px", 100 * c, pu.p_noise_on, pu.p_noise_off, nu.rate_hz);
  note("C %.4f %%: binned   P %.3f (off %.3f), noise %.3g Hz/px", 100 * c, pb.p_noise_on, pb.p_noise_off, nb.rate_hz);

  // Scalar cross-check of the unbinned probability.
  oracle::PixelParams p;
  const auto tm = default_step_timing(plain);
  const double mu = lux * kCountPerLuxStep;
  const int trials = 400;
  int hits = 0;
  for (int k = 0; k < trials; ++k) {
    oracle::NoisyInput in(p, 7000 + k);
    oracle::ScalarPixel px(p, std::log(mu));
    std::uint64_t t = 0;
    for (; t < tm.t_test_us(); t += p.dt_us) {
      const bool pulse = t >= tm.warmup_us && t < tm.warmup_us + tm.pulse_us;
      px.step(in(mu * (pulse ? 1 + tm.reset_contrast : 1.0)), t);
    }
    px.reset_detector();
    bool hit = false;
    for (; t < tm.t_test_us() + tm.window_us; t += p.dt_us) hit |= px.step(in(mu * (1 + c)), t) == 1;
    hits += hit;
  }
  const double po = static_cast<double>(hits) / trials;
  note("scalar oracle unbinned P %.3f", po);
  return pu.p_noise_on > 0.05 && pb.p_noise_on > 0.05 && pu.p_noise_off == 0 && pb.p_noise_off == 0 &&
         pu.p_noise_on > pb.p_noise_on && nu.rate_hz > nb.rate_hz && std::abs(pu.p_noise_on - po) <= 0.1;
}

// --- 10 -----------------------------------------------------------------------

bool determinism_round_trip() {
  SensorConfig cfg;
  cfg.width = cfg.height = 32;
  cfg.mismatch_sigma = 0.1;
  cfg.seed = 2024;
  bool ok = true;
  for (bool binned : {false, true}) {
    cfg.binning_enabled = binned;
    const SceneSpec scene{centered_chart(cfg, 0.5, {{0.02, Polarity::On}, {0.02, Polarity::Off}}), {}};
    std::string files[2][2];
    std::size_t count = 0;
    for (int k = 0; k < 2; ++k) {
      PixelArray a(cfg);
      a.initialize(scene, 0);
      const auto ev = a.advance_to(scene, 300'000, k == 0 ? 1 : 8);
      count = ev.size();
      files[k][0] = serialize_events(ev, EventFormat::Binary, cfg.width, cfg.height);
      files[k][1] = serialize_events(ev, EventFormat::Csv);
    }
    const bool same = files[0][0] == files[1][0] && files[0][1] == files[1][1];
    note("%s: %zu events, 1 vs 8 workers %s", binned ? "binned" : "unbinned", count, same ? "identical" : "DIFFER");
    ok &= same && count > 0;
  }

  std::mt19937_64 gen(99);
  std::vector<Event> ev(100'000);
  std::uint64_t t = 0;
  for (auto& e : ev) {
    t += gen() % 20;
    e = {t, static_cast<std::uint16_t>(gen() % 1024), static_cast<std::uint16_t>(gen() % 1024),
         gen() % 2 ? Polarity::On : Polarity::Off};
  }
  std::sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) {
    return std::tie(a.t_us, a.y, a.x) < std::tie(b.t_us, b.y, b.x);
  });
  for (auto fmt : {EventFormat::Csv, EventFormat::Binary}) {
    const bool rt = deserialize_events(serialize_events(ev, fmt, 1024, 1024), fmt).events == ev;
    note("1e5 events, %s round trip %s", fmt == EventFormat::Csv ? "csv" : "binary", rt ? "exact" : "BROKEN");
    ok &= rt;
  }
  return ok;
}

// --- 11 -----------------------------------------------------------------------

bool hdr_auto_centering() {
  const std::uint64_t hold = 200'000;
  auto run = [&](bool auto_center, std::vector<int>& on, std::vector<int>& off, int& pixels) {
    SensorConfig cfg;
    cfg.width = cfg.height = 8;
    cfg.auto_center_enabled = auto_center;
    cfg.preamp_sat = 7 * std::log(std::pow(10.0, 1.5));  // +-30 dB at the preamp output
    pixels = cfg.width * cfg.height;
    PixelArray a(cfg);
    a.initialize(SceneSpec{ConstantScene{1.0}, {}}, 0);
    a.advance_to(SceneSpec{ConstantScene{1.0}, {}}, hold);
    for (int k = 1; k <= 10; ++k) {
      const SceneSpec scene{ConstantScene{std::pow(10.0, 0.5 * k)}, {}};  // 10 dB per step
      const auto ev = a.advance_to(scene, (k + 1) * hold);
      std::vector<char> seen(static_cast<std::size_t>(pixels), 0);
      int n_off = 0;
      for (const auto& e : ev) {
        if (e.polarity == Polarity::On)
          seen[static_cast<std::size_t>(e.y * cfg.width + e.x)] = 1;
        else
          ++n_off;
      }
      on.push_back(static_cast<int>(std::count(seen.begin(), seen.end(), 1)));
      off.push_back(n_off);
    }
  };
  std::vector<int> on_a, off_a, on_f, off_f;
  int pixels = 0;
  run(true, on_a, off_a, pixels);
  run(false, on_f, off_f, pixels);
  bool ok = true;
  for (int k = 0; k < 10; ++k) {
    const bool tracks = on_a[k] == pixels;
    const bool frozen_ok = k < 3 ? on_f[k] == pixels : on_f[k] == 0 && off_f[k] == 0;
    note("+%3d dB: auto-center %2d/%d px ON (%d OFF events); frozen %2d/%d px ON (%d OFF events)%s", 10 * (k + 1),
         on_a[k], pixels, off_a[k], on_f[k], pixels, off_f[k], tracks && frozen_ok ? "" : "  <-");
    ok &= tracks && frozen_ok;
  }
  return ok;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<bool()>>> criteria{
      {"photon budget exactness", photon_budget_exact},
      {"noise-floor calibration", noise_floor_calibration},
      {"deterministic NCT oracle", deterministic_nct},
      {"S-curve monotonicity and zero-contrast control", s_curve_monotone},
      {"preamp sensitivity ratio", preamp_ratio},
      {"binning noise reduction", binning_noise_reduction},
      {"f_cut noise trade", fcut_noise_trade},
      {"chart plausibility band", chart_band},
      {"stochastic resonance", stochastic_resonance},
      {"determinism and round trip", determinism_round_trip},
      {"HDR auto-centering", hdr_auto_centering},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = false;
    try {
      pass = criteria[i].second();
    } catch (const std::exception& e) {
      note("exception: %s", e.what());
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %zu: %s (%.1f s)\n", pass ? "PASS" : "FAIL", i + 1, criteria[i].first, s);
    std::fflush(stdout);
    failed += pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
