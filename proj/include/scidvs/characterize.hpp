#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "scidvs/core.hpp"
#include "scidvs/event.hpp"
#include "scidvs/stimulus.hpp"

namespace scidvs {

/// Response window after a test step or chart edge.
inline constexpr std::uint64_t kResponseWindowUs = 200'000;
/// Noise budget for chart experiments.
inline constexpr double kChartNoiseLimitHz = 6.0;
/// Fraction of pixels that must respond for an edge to count as detected.
inline constexpr double kDetectionFraction = 0.5;

/// 1 / (2 pi f_cut), in seconds.
double integration_time_s(double f_cut_hz);

// --- S-curves ---------------------------------------------------------------

struct SCurvePoint {
  double contrast = 0;        // magnitude; the step sign follows the curve polarity
  double fraction = 0;        // (pixel, trial) pairs with >= 1 correct-polarity event
  double wrong_fraction = 0;  // pairs with >= 1 opposite-polarity event
  std::uint64_t trials = 0;   // (pixel, trial) pairs
};

struct SCurve {
  Polarity polarity = Polarity::On;
  double base_lux = 0;
  std::vector<SCurvePoint> points;  // strictly increasing contrast, first row is the C = 0 control
};

/// Timing of one step trial: rest, a reset pulse, settling, then the test step
/// and its response window. Durations default to multiples of the filter time
/// constant.
struct StepTiming {
  std::uint64_t warmup_us = 0;
  std::uint64_t pulse_us = 0;
  std::uint64_t settle_us = 0;
  std::uint64_t window_us = kResponseWindowUs;
  double reset_contrast = 0.60;

  std::uint64_t t_test_us() const { return warmup_us + pulse_us + settle_us; }
};

StepTiming default_step_timing(const SensorConfig& cfg);

/// Step-response scene for one trial.
StepProtocol step_scene(double base_lux, double signed_contrast, const StepTiming& timing);

/// Fraction of active pixels responding to steps of each contrast. Every
/// (contrast, trial) pair is an independent noise realisation on the same
/// mismatch map. Just before each test step the change detectors are reset
/// globally, so every pixel starts the response window at rest.
SCurve measure_s_curve(const SensorConfig& cfg, const std::vector<double>& contrasts, double base_lux,
                       int trials, Polarity polarity, unsigned workers = 1,
                       std::optional<StepTiming> timing = std::nullopt);

/// Contrast at which the curve first reaches 50 %, linearly interpolated
/// between the bracketing points. nullopt when 50 % is never reached.
std::optional<double> estimate_nct(const SCurve& curve);

/// Noise-free, mismatch-free threshold: exp(theta / gain) - 1.
double nominal_nct(const SensorConfig& cfg, Polarity polarity);

// --- noise ------------------------------------------------------------------

struct NoisePoint {
  double value = 0;  // lux or Hz, depending on the sweep
  double rate_hz = 0;
  std::uint64_t events = 0;
  int active_pixels = 0;
  double duration_s = 0;

  /// Poisson counting error of rate_hz.
  double rate_sigma() const;
};

struct NoiseSweepResult {
  std::string swept;  // "lux" or "f_cut_hz"
  bool binning = false;
  std::vector<NoisePoint> points;
};

struct IlluminanceSweep {
  NoiseSweepResult binned;    // binning + force_reset
  NoiseSweepResult unbinned;
};

/// Events per active pixel per second on a static uniform scene after a
/// warm-up of five filter time constants.
NoisePoint measure_noise_rate(const SensorConfig& cfg, double lux, std::uint64_t duration_us, unsigned workers = 1,
                              std::uint64_t noise_salt = 0);

IlluminanceSweep noise_sweep_illuminance(const SensorConfig& cfg, const std::vector<double>& lux_list,
                                         std::uint64_t duration_us, unsigned workers = 1);

/// dt is reduced per point where needed to keep the step budget.
NoiseSweepResult noise_sweep_fcut(const SensorConfig& cfg, const std::vector<double>& fcut_list, double lux,
                                  std::uint64_t duration_us, unsigned workers = 1);

/// Copy of `cfg` at cutoff `f_cut_hz`, with dt clipped to the step budget.
SensorConfig with_fcut(const SensorConfig& cfg, double f_cut_hz);

struct ThresholdTuning {
  std::vector<double> thetas;
  std::vector<NoisePoint> rates;
  std::optional<double> chosen;  // smallest theta whose noise rate is below the limit
};

/// Grid search over symmetric thresholds (theta_on = theta_off = theta) for
/// the lowest one that keeps the noise rate below `max_rate_hz`.
ThresholdTuning tune_threshold(const SensorConfig& cfg, const std::vector<double>& thetas, double lux,
                               std::uint64_t duration_us, double max_rate_hz, unsigned workers = 1);

// --- rotating chart ----------------------------------------------------------

struct ChartEdgeResult {
  double contrast = 0;
  Polarity polarity = Polarity::On;
  std::uint64_t visits = 0;     // (pixel, revolution) passes through the test sector
  std::uint64_t responses = 0;  // passes with >= 1 correct-polarity event
  std::uint64_t wrong = 0;      // passes with >= 1 opposite-polarity event
  double fraction = 0;
  bool detected = false;
};

struct ChartReport {
  std::vector<ChartEdgeResult> edges;
  int pixels = 0;  // active pixels inside the measurement annulus
  int revolutions = 0;
  double noise_rate_hz = 0;
  double noise_limit_hz = kChartNoiseLimitHz;
  bool noise_ok = false;
  double events_per_pixel_s = 0;  // mean activity inside the annulus
  std::uint64_t measure_begin_us = 0;
  std::vector<Event> events;
};

struct ChartOptions {
  int revolutions = 2;             // measured revolutions, after one warm-up revolution
  double inner_radius = 0.25;      // annulus, as fractions of the inscribed radius
  double outer_radius = 1.0;
  double noise_limit_hz = kChartNoiseLimitHz;
};

/// Runs the rotating chart and decides, per wedge, whether at least half of
/// the annulus pixels answer the test edge with a correct-polarity event while
/// they sit in the test sector. The noise rate is measured separately on a
/// static scene at the chart's base illuminance.
ChartReport chart_detection(const SensorConfig& cfg, const RotatingChart& chart, const ChartOptions& options = {},
                            unsigned workers = 1);

// --- stochastic resonance ------------------------------------------------------

struct ResonanceProbe {
  double contrast = 0;
  double p_noise_on = 0;
  double p_noise_off = 0;
  double wrong_noise_on = 0;
  double wrong_noise_off = 0;
  std::uint64_t trials = 0;
};

/// Detection probability of a sub-threshold step with the configured noise
/// and with noise switched off. A config with noise_mode = off is probed
/// with poisson_plus_buffer for the noisy run.
ResonanceProbe stochastic_resonance_probe(const SensorConfig& cfg, double contrast, Polarity polarity, int trials,
                                          double base_lux, unsigned workers = 1);

// --- photon budget -------------------------------------------------------------

struct BudgetReport {
  double lux = 0;
  double f_cut_hz = 0;
  double tau_s = 0;
  double photoelectrons = 0;
  std::optional<double> sigma_over_n;
  std::vector<std::pair<int, double>> k_sigma_contrasts;  // (k, k * sigma / N)
};

/// Photoelectrons integrated over tau = 1/(2 pi f_cut) and the relative noise
/// sqrt(noise_factor / N). Pure arithmetic.
BudgetReport photon_budget(double lux, double f_cut_hz, const SensorConfig& cfg, bool binned);

/// Photons needed to see contrast C at k sigma with twice shot noise: 2 k^2 / C^2.
double rose_required_photons(double contrast, double k_sigma);

// --- export --------------------------------------------------------------------

nlohmann::json to_json(const SCurve& curve);
nlohmann::json to_json(const NoiseSweepResult& sweep);
nlohmann::json to_json(const ChartReport& report);
nlohmann::json to_json(const BudgetReport& report);
nlohmann::json to_json(const ResonanceProbe& probe);

std::string to_csv(const SCurve& curve);
std::string to_csv(const NoiseSweepResult& sweep);
std::string to_csv(const ChartReport& report);

}  // namespace scidvs
