#include "scidvs/core.hpp"

#include <cmath>
#include <sstream>

namespace scidvs {

namespace {

std::string join_violations(const std::vector<std::string>& v) {
  std::ostringstream os;
  os << "invalid configuration";
  for (const auto& s : v) os << "; " << s;
  return os.str();
}

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error(join_violations(violations)), violations_(std::move(violations)) {}

std::string to_string(NoiseMode mode) {
  switch (mode) {
    case NoiseMode::PoissonPlusBuffer: return "poisson_plus_buffer";
    case NoiseMode::AnalyticGaussian: return "analytic_gaussian";
    case NoiseMode::Off: return "off";
  }
  return "off";
}

NoiseMode noise_mode_from_string(const std::string& name) {
  if (name == "poisson_plus_buffer") return NoiseMode::PoissonPlusBuffer;
  if (name == "analytic_gaussian") return NoiseMode::AnalyticGaussian;
  if (name == "off") return NoiseMode::Off;
  throw ConfigError({"noise_mode: unknown mode '" + name +
                     "' (expected poisson_plus_buffer, analytic_gaussian or off)"});
}

double max_dt_us(double f_cut_hz) { return 1.0e6 / (20.0 * f_cut_hz); }

std::vector<std::string> config_violations(const SensorConfig& cfg) {
  std::vector<std::string> v;
  auto fail = [&](std::string s) { v.push_back(std::move(s)); };

  if (cfg.width <= 0 || cfg.height <= 0) fail("width, height: must be positive");
  if (cfg.width > 65535 || cfg.height > 65535) fail("width, height: must fit in 16 bits");
  if (cfg.binning_enabled && (cfg.width % 2 != 0 || cfg.height % 2 != 0))
    fail("odd dimension: width and height must be even when binning_enabled");
  if (cfg.force_reset && !cfg.binning_enabled)
    fail("force_reset: requires binning_enabled");
  if (!(cfg.pixel_pitch_um > 0)) fail("pixel_pitch_um: must be > 0");
  if (!(cfg.qe > 0 && cfg.qe <= 1)) fail("qe: must lie in (0, 1]");
  if (!(cfg.theta_on > 0)) fail("theta_on: must be > 0");
  if (!(cfg.theta_off > 0)) fail("theta_off: must be > 0");
  if (!(cfg.preamp_gain >= 1)) fail("preamp_gain: must be >= 1");
  if (!(cfg.preamp_sat > 0)) fail("preamp_sat: must be > 0");
  if (!(cfg.mismatch_sigma >= 0)) fail("mismatch_sigma: must be >= 0");
  if (!(cfg.noise_factor > 0)) fail("noise_factor: must be > 0");
  if (!(cfg.aps_fullwell_e > 0)) fail("aps_fullwell_e: must be > 0");
  if (cfg.dt_us == 0) fail("dt_us: must be > 0");
  if (!(cfg.f_cut_hz > 0)) {
    fail("f_cut_hz: must be > 0");
  } else if (static_cast<double>(cfg.dt_us) > max_dt_us(cfg.f_cut_hz)) {
    std::ostringstream os;
    os << "dt too coarse: dt_us=" << cfg.dt_us << " exceeds 1e6/(20*f_cut_hz)="
       << max_dt_us(cfg.f_cut_hz);
    fail(os.str());
  }
  return v;
}

SensorConfig validate_config(const SensorConfig& cfg) {
  auto v = config_violations(cfg);
  if (!v.empty()) throw ConfigError(std::move(v));
  return cfg;
}

// ---------------------------------------------------------------------------

std::array<std::uint32_t, 4> PixelRng::philox(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kPhiloxM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kPhiloxM1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

PixelRng::PixelRng(std::uint64_t key, std::uint32_t x, std::uint32_t y)
    : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)}, x_(x), y_(y) {}

void PixelRng::refill() {
  buf_ = philox({static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32), x_, y_},
                key_);
  ++block_;
  next_ = 0;
}

PixelRng::result_type PixelRng::operator()() {
  if (next_ > 2) refill();
  const std::uint64_t lo = buf_[next_];
  const std::uint64_t hi = buf_[next_ + 1];
  next_ += 2;
  return (hi << 32) | lo;
}

double PixelRng::uniform() {
  // 53 random bits, offset by half an ulp so 0 is never returned.
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double PixelRng::normal() { return normal_(*this); }

std::uint64_t stream_key(std::uint64_t seed, StreamTag tag, std::uint64_t salt) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
  return splitmix64(h ^ salt);
}

PixelRng pixel_rng_stream(std::uint64_t seed, int x, int y, int width, int height, StreamTag tag,
                          std::uint64_t salt) {
  if (x < 0 || y < 0 || x >= width || y >= height) {
    std::ostringstream os;
    os << "pixel_rng_stream: (" << x << ", " << y << ") outside " << width << "x" << height;
    throw std::out_of_range(os.str());
  }
  return PixelRng(stream_key(seed, tag, salt), static_cast<std::uint32_t>(x),
                  static_cast<std::uint32_t>(y));
}

MismatchMap build_mismatch_map(const SensorConfig& cfg) {
  MismatchMap map;
  map.width = cfg.width;
  map.height = cfg.height;
  const auto n = static_cast<std::size_t>(cfg.width) * static_cast<std::size_t>(cfg.height);
  map.on_factor.assign(n, 1.0);
  map.off_factor.assign(n, 1.0);
  if (cfg.mismatch_sigma == 0.0) return map;

  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      auto rng = pixel_rng_stream(cfg.seed, x, y, cfg.width, cfg.height, StreamTag::Mismatch);
      const auto i = map.index(x, y);
      map.on_factor[i] = std::exp(cfg.mismatch_sigma * rng.normal());
      map.off_factor[i] = std::exp(cfg.mismatch_sigma * rng.normal());
    }
  }
  return map;
}

}  // namespace scidvs
