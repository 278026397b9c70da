#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "scidvs/core.hpp"
#include "scidvs/event.hpp"
#include "scidvs/frontend.hpp"
#include "scidvs/stimulus.hpp"

namespace scidvs {

/// Dynamic state of one pixel's signal chain.
struct PixelState {
  double ell_filt = 0;     // low-pass filtered log signal
  double ell_center = 0;   // preamp auto-center reference
  double v_mem = 0;        // memorized change-detector level
  std::uint64_t refractory_until_us = 0;
  double theta_on_px = 0;  // mismatched thresholds, detector units
  double theta_off_px = 0;
};

/// Exact first-order coefficient 1 - exp(-2 pi f_cut dt).
double lowpass_alpha(std::uint64_t dt_us, double f_cut_hz);
inline double lowpass_step(double prev, double input, double alpha) { return prev + alpha * (input - prev); }
double lowpass_step(double prev, double input, std::uint64_t dt_us, double f_cut_hz);

/// Detector input for log signal `ell`: clamp(gain (ell - center), +-sat) with
/// the preamp enabled, `ell` itself when bypassed.
double preamp(double ell, double center, const SensorConfig& cfg);

/// Re-centers the preamp on the current filtered signal after an event. The
/// memorized level follows the detector input, which becomes zero. No-op when
/// the preamp is bypassed or centering is frozen.
void auto_center(PixelState& state, const SensorConfig& cfg);

/// Compares detector input `v` against the memorized level. On an event the
/// memorized level resets to `v`, the refractory deadline is set and the preamp
/// re-centers.
std::optional<Polarity> change_detect(PixelState& state, double v, std::uint64_t t_us, const SensorConfig& cfg);

/// Shared count of a 2x2 group.
std::int64_t bin_photons(std::span<const std::int64_t, 4> counts);

/// 2x2 group containing a pixel. The master is the top-left pixel.
struct BinGroup {
  int x0 = 0;
  int y0 = 0;

  bool is_master(int x, int y) const { return x == x0 && y == y0; }
  std::array<std::array<int, 2>, 4> members() const {
    return {{{x0, y0}, {x0 + 1, y0}, {x0, y0 + 1}, {x0 + 1, y0 + 1}}};
  }
};

inline BinGroup bin_group_of(int x, int y) { return {x - x % 2, y - y % 2}; }

/// Welford accumulator over a pixel's filtered log signal.
struct SignalStats {
  std::uint64_t count = 0;
  double mean = 0;
  double m2 = 0;

  void add(double v) {
    ++count;
    const double d = v - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (v - mean);
  }
  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
};

/// The full pixel array. Every pixel owns its state and random stream, so the
/// array can be split across any number of workers without changing results.
class PixelArray {
 public:
  /// `noise_salt` selects an independent noise realisation (e.g. per trial);
  /// the mismatch map depends on the config seed only.
  explicit PixelArray(const SensorConfig& cfg, std::uint64_t noise_salt = 0);

  const SensorConfig& config() const { return cfg_; }
  const MismatchMap& mismatch() const { return mismatch_; }
  std::uint64_t now_us() const { return now_us_; }

  /// Puts every pixel at rest on the noiseless scene at t_us: filters settled,
  /// preamp centered, memorized level equal to the detector input.
  void initialize(const SceneSpec& scene, std::uint64_t t_us);

  /// Simulates every step with time in [now, t_end_us) and returns the events
  /// in canonical (t, y, x) order.
  std::vector<Event> advance_to(const SceneSpec& scene, std::uint64_t t_end_us, unsigned workers = 1);

  /// Simulates exactly one step at now().
  std::vector<Event> step_array(const SceneSpec& scene, unsigned workers = 1);

  /// Global change-detector reset: memorized levels jump to the current
  /// detector input, refractory clears, and the preamp re-centers if
  /// auto-centering is enabled.
  void reset_detectors();

  /// Collect per-pixel statistics of the filtered log signal from now on.
  void track_signal_stats(bool enabled);
  const SignalStats& signal_stats(int x, int y) const { return stats_[index(x, y)]; }

  const PixelState& state(int x, int y) const { return states_[index(x, y)]; }
  PixelState& state(int x, int y) { return states_[index(x, y)]; }

  /// Pixels able to emit events (one per group with force_reset).
  int active_pixels() const;
  bool emits_events(int x, int y) const;

  /// Photoelectron count per step at the 1 lux reference.
  double reference_count(bool binned) const;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(cfg_.width) + static_cast<std::size_t>(x);
  }
  void simulate_rows(const SceneSpec& scene, int y_begin, int y_end, std::uint64_t t_begin, std::uint64_t steps,
                     std::vector<Event>& out);
  void process_pixel(int x, int y, double ell_raw, std::uint64_t t_us, std::vector<Event>& out);

  SensorConfig cfg_;
  MismatchMap mismatch_;
  NoiseCalibration cal_;
  std::vector<PixelState> states_;
  std::vector<PixelRng> rngs_;
  std::vector<std::poisson_distribution<std::int64_t>> poisson_;
  std::vector<SignalStats> stats_;
  bool track_stats_ = false;
  std::uint64_t now_us_ = 0;
  bool initialized_ = false;
};

}  // namespace scidvs
