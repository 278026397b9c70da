#include "scidvs/pixel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

namespace scidvs {

double lowpass_alpha(std::uint64_t dt_us, double f_cut_hz) {
  return -std::expm1(-2.0 * std::numbers::pi * f_cut_hz * static_cast<double>(dt_us) * 1e-6);
}

double lowpass_step(double prev, double input, std::uint64_t dt_us, double f_cut_hz) {
  return lowpass_step(prev, input, lowpass_alpha(dt_us, f_cut_hz));
}

double preamp(double ell, double center, const SensorConfig& cfg) {
  if (!cfg.preamp_enabled) return ell;
  return std::clamp(cfg.preamp_gain * (ell - center), -cfg.preamp_sat, cfg.preamp_sat);
}

void auto_center(PixelState& state, const SensorConfig& cfg) {
  if (!cfg.preamp_enabled || !cfg.auto_center_enabled) return;
  state.ell_center = state.ell_filt;
  state.v_mem = preamp(state.ell_filt, state.ell_center, cfg);
}

std::optional<Polarity> change_detect(PixelState& state, double v, std::uint64_t t_us, const SensorConfig& cfg) {
  if (t_us < state.refractory_until_us) return std::nullopt;
  const double up = v - state.v_mem;
  const double down = state.v_mem - v;
  const bool on = up >= state.theta_on_px;
  const bool off = down >= state.theta_off_px;
  if (!on && !off) return std::nullopt;

  Polarity p = on ? Polarity::On : Polarity::Off;
  if (on && off) p = up / state.theta_on_px >= down / state.theta_off_px ? Polarity::On : Polarity::Off;

  state.v_mem = v;
  state.refractory_until_us = t_us + cfg.refractory_us;
  auto_center(state, cfg);
  return p;
}

std::int64_t bin_photons(std::span<const std::int64_t, 4> counts) {
  return counts[0] + counts[1] + counts[2] + counts[3];
}

// ---------------------------------------------------------------------------

PixelArray::PixelArray(const SensorConfig& cfg, std::uint64_t noise_salt)
    : cfg_(validate_config(cfg)), mismatch_(build_mismatch_map(cfg_)), cal_(noise_calibration(cfg_)) {
  const auto n = static_cast<std::size_t>(cfg_.width) * static_cast<std::size_t>(cfg_.height);
  states_.resize(n);
  stats_.resize(n);
  poisson_.resize(n);
  rngs_.reserve(n);
  const auto key = stream_key(cfg_.seed, StreamTag::Noise, noise_salt);
  for (int y = 0; y < cfg_.height; ++y)
    for (int x = 0; x < cfg_.width; ++x)
      rngs_.emplace_back(key, static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y));
}

double PixelArray::reference_count(bool binned) const {
  return photoelectron_rate(1.0, cfg_, binned) * static_cast<double>(cfg_.dt_us) * 1e-6;
}

int PixelArray::active_pixels() const {
  const int all = cfg_.width * cfg_.height;
  return cfg_.force_reset ? all / 4 : all;
}

bool PixelArray::emits_events(int x, int y) const { return !cfg_.force_reset || (x % 2 == 0 && y % 2 == 0); }

void PixelArray::initialize(const SceneSpec& scene, std::uint64_t t_us) {
  const double dt_s = static_cast<double>(cfg_.dt_us) * 1e-6;
  const bool binned = cfg_.binning_enabled;
  const double ref = reference_count(binned);
  for (int y = 0; y < cfg_.height; ++y) {
    for (int x = 0; x < cfg_.width; ++x) {
      double mean = 0;
      if (binned) {
        for (const auto& [mx, my] : bin_group_of(x, y).members())
          mean += photoelectron_rate(illuminance_at(scene, mx, my, t_us), cfg_, false) * dt_s;
      } else {
        mean = photoelectron_rate(illuminance_at(scene, x, y, t_us), cfg_, false) * dt_s;
      }
      auto& s = states_[index(x, y)];
      s.ell_filt = log_intensity(mean, ref);
      s.ell_center = s.ell_filt;
      s.v_mem = preamp(s.ell_filt, s.ell_center, cfg_);
      s.refractory_until_us = 0;
      s.theta_on_px = cfg_.theta_on * mismatch_.on(x, y);
      s.theta_off_px = cfg_.theta_off * mismatch_.off(x, y);
    }
  }
  now_us_ = t_us;
  initialized_ = true;
}

void PixelArray::reset_detectors() {
  for (auto& s : states_) {
    if (cfg_.preamp_enabled && cfg_.auto_center_enabled) s.ell_center = s.ell_filt;
    s.v_mem = preamp(s.ell_filt, s.ell_center, cfg_);
    s.refractory_until_us = 0;
  }
}

void PixelArray::track_signal_stats(bool enabled) {
  track_stats_ = enabled;
  std::fill(stats_.begin(), stats_.end(), SignalStats{});
}

void PixelArray::process_pixel(int x, int y, double ell_raw, std::uint64_t t_us, std::vector<Event>& out) {
  const auto i = index(x, y);
  auto& s = states_[i];
  s.ell_filt = lowpass_step(s.ell_filt, ell_raw, cal_.alpha);
  if (track_stats_) stats_[i].add(s.ell_filt);
  if (!emits_events(x, y)) return;
  const double v = preamp(s.ell_filt, s.ell_center, cfg_);
  if (auto p = change_detect(s, v, t_us, cfg_))
    out.push_back(Event{t_us, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), *p});
}

void PixelArray::simulate_rows(const SceneSpec& scene, int y_begin, int y_end, std::uint64_t t_begin,
                               std::uint64_t steps, std::vector<Event>& out) {
  const double dt_s = static_cast<double>(cfg_.dt_us) * 1e-6;
  const NoiseMode mode = cfg_.noise_mode;

  if (!cfg_.binning_enabled) {
    const double ref = reference_count(false);
    for (std::uint64_t k = 0; k < steps; ++k) {
      const std::uint64_t t = t_begin + k * cfg_.dt_us;
      for (int y = y_begin; y < y_end; ++y) {
        for (int x = 0; x < cfg_.width; ++x) {
          const double mean = photoelectron_rate(illuminance_at(scene, x, y, t), cfg_, false) * dt_s;
          const auto sample = sample_photon_step(mean, ref, mode, cal_, rngs_[index(x, y)], &poisson_[index(x, y)]);
          process_pixel(x, y, sample.ell, t, out);
        }
      }
    }
    return;
  }

  // Shorted photodiodes: one shared log signal per group, four buffers.
  const double ref = reference_count(true);
  for (std::uint64_t k = 0; k < steps; ++k) {
    const std::uint64_t t = t_begin + k * cfg_.dt_us;
    for (int y0 = y_begin; y0 < y_end; y0 += 2) {
      for (int x0 = 0; x0 < cfg_.width; x0 += 2) {
        const auto members = BinGroup{x0, y0}.members();
        std::array<std::int64_t, 4> counts{};
        double mean = 0;
        for (std::size_t m = 0; m < 4; ++m) {
          const auto [mx, my] = members[m];
          const double mean_m = photoelectron_rate(illuminance_at(scene, mx, my, t), cfg_, false) * dt_s;
          mean += mean_m;
          if (mode == NoiseMode::PoissonPlusBuffer) counts[m] = sample_count(mean_m, rngs_[index(mx, my)], poisson_[index(mx, my)]);
        }
        double shared = 0;
        switch (mode) {
          case NoiseMode::PoissonPlusBuffer:
            shared = log_intensity(static_cast<double>(bin_photons(counts)), ref);
            break;
          case NoiseMode::AnalyticGaussian:
            shared = log_intensity(mean, ref) +
                     rngs_[index(x0, y0)].normal() / std::sqrt(std::max(mean, kCountFloor));
            break;
          case NoiseMode::Off:
            shared = log_intensity(mean, ref);
            break;
        }
        const double buffer_sigma = mode == NoiseMode::Off ? 0.0 : buffer_noise_sigma(mean, cal_);
        for (const auto& [mx, my] : members) {
          double ell = shared;
          if (buffer_sigma > 0) ell += buffer_sigma * rngs_[index(mx, my)].normal();
          process_pixel(mx, my, ell, t, out);
        }
      }
    }
  }
}

std::vector<Event> PixelArray::advance_to(const SceneSpec& scene, std::uint64_t t_end_us, unsigned workers) {
  if (!initialized_) initialize(scene, now_us_);
  if (t_end_us <= now_us_) return {};
  const std::uint64_t steps = (t_end_us - now_us_ + cfg_.dt_us - 1) / cfg_.dt_us;
  const std::uint64_t t_begin = now_us_;

  const int unit = cfg_.binning_enabled ? 2 : 1;
  const int units = cfg_.height / unit;
  const int chunks = std::clamp(static_cast<int>(workers), 1, units);

  std::vector<std::vector<Event>> parts(static_cast<std::size_t>(chunks));
  auto rows_of = [&](int c) {
    const int u0 = units * c / chunks;
    const int u1 = units * (c + 1) / chunks;
    return std::pair{u0 * unit, u1 * unit};
  };
  if (chunks == 1) {
    simulate_rows(scene, 0, cfg_.height, t_begin, steps, parts[0]);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(chunks));
    for (int c = 0; c < chunks; ++c) {
      pool.emplace_back([&, c] {
        const auto [y0, y1] = rows_of(c);
        simulate_rows(scene, y0, y1, t_begin, steps, parts[static_cast<std::size_t>(c)]);
      });
    }
  }
  now_us_ = t_begin + steps * cfg_.dt_us;

  std::vector<Event> events;
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  events.reserve(total);
  for (auto& p : parts) events.insert(events.end(), p.begin(), p.end());
  std::sort(events.begin(), events.end(), canonical_less);
  return events;
}

std::vector<Event> PixelArray::step_array(const SceneSpec& scene, unsigned workers) {
  return advance_to(scene, now_us_ + cfg_.dt_us, workers);
}

}  // namespace scidvs
