#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace scidvs {

/// Raised when a SensorConfig or scene violates its invariants. Carries every
/// violation found, not just the first.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// Malformed or truncated input data (event files, PGM images).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An experiment was asked to run outside its preconditions.
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class NoiseMode { PoissonPlusBuffer, AnalyticGaussian, Off };

std::string to_string(NoiseMode mode);
NoiseMode noise_mode_from_string(const std::string& name);

/// Operating point of the simulated sensor. Thresholds are expressed at the
/// change-detector input (preamp output units); time is integer microseconds.
struct SensorConfig {
  int width = 64;
  int height = 64;
  double pixel_pitch_um = 30.0;
  double qe = 0.5;
  double theta_on = 0.119;
  double theta_off = 0.119;
  bool preamp_enabled = true;
  double preamp_gain = 7.0;
  double preamp_sat = 3.45;
  bool auto_center_enabled = true;
  double f_cut_hz = 18.0;
  std::uint64_t refractory_us = 1000;
  bool binning_enabled = false;
  bool force_reset = false;
  double mismatch_sigma = 0.0;
  NoiseMode noise_mode = NoiseMode::PoissonPlusBuffer;
  /// Filtered log-noise variance in units of 1/N (2 = twice shot noise).
  double noise_factor = 2.0;
  std::uint64_t dt_us = 100;
  std::uint64_t seed = 1;
  double aps_fullwell_e = 1.0e5;

  /// Gain between filtered log signal and detector input.
  double effective_gain() const { return preamp_enabled ? preamp_gain : 1.0; }
};

/// Largest step that still resolves the low-pass buffer: 1e6 / (20 f_cut) us.
double max_dt_us(double f_cut_hz);

/// Every violated invariant of `cfg`, empty when valid.
std::vector<std::string> config_violations(const SensorConfig& cfg);

/// Returns `cfg` unchanged if valid, otherwise throws ConfigError listing all
/// violations.
SensorConfig validate_config(const SensorConfig& cfg);

/// Counter-based Philox4x32-10 generator. A stream is identified by a 64-bit
/// key and a pixel address; the n-th output depends only on (key, x, y, n),
/// so results never depend on evaluation order or thread schedule.
class PixelRng {
 public:
  using result_type = std::uint64_t;

  PixelRng() = default;
  PixelRng(std::uint64_t key, std::uint32_t x, std::uint32_t y);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()();

  /// Uniform double in the open interval (0, 1).
  double uniform();
  /// Standard normal deviate.
  double normal();

  /// Raw Philox4x32-10 block function, exposed for known-answer tests.
  static std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> ctr,
                                             std::array<std::uint32_t, 2> key);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_{};
  std::uint32_t x_ = 0;
  std::uint32_t y_ = 0;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int next_ = 4;
  std::normal_distribution<double> normal_{};
};

/// Independent purposes get independent streams for the same pixel.
enum class StreamTag : std::uint64_t { Noise = 0, Mismatch = 1, Aps = 2 };

/// Mixes a seed with a purpose tag and an optional salt (e.g. a trial index)
/// into a stream key.
std::uint64_t stream_key(std::uint64_t seed, StreamTag tag, std::uint64_t salt = 0);

/// Deterministic stream for pixel (x, y). Throws std::out_of_range if the
/// address lies outside the width x height array.
PixelRng pixel_rng_stream(std::uint64_t seed, int x, int y, int width, int height,
                          StreamTag tag = StreamTag::Noise, std::uint64_t salt = 0);

/// Per-pixel multiplicative threshold factors, log-normally distributed.
struct MismatchMap {
  int width = 0;
  int height = 0;
  std::vector<double> on_factor;
  std::vector<double> off_factor;

  double on(int x, int y) const { return on_factor[index(x, y)]; }
  double off(int x, int y) const { return off_factor[index(x, y)]; }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(x);
  }
};

MismatchMap build_mismatch_map(const SensorConfig& cfg);

}  // namespace scidvs
