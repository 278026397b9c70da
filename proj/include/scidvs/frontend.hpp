#pragma once

#include <cstdint>
#include <random>

#include "scidvs/core.hpp"

namespace scidvs {

/// Photoelectron count substituted for zero so the log stays finite.
inline constexpr double kCountFloor = 0.5;

/// Above this mean, counts are drawn from the rounded Gaussian approximation.
inline constexpr double kGaussianBranchMean = 1000.0;

/// One step of the photoreceptor front end.
struct PhotonSample {
  double n_e = 0;  // photoelectrons collected this step
  double ell = 0;  // log-intensity relative to the reference count
};

/// Poisson photoelectron count with mean rate * dt.
std::int64_t sample_photoelectrons(double rate_eps, std::uint64_t dt_us, PixelRng& rng);
std::int64_t sample_count(double mean, PixelRng& rng);
/// Same draw, reusing `dist` while the mean is unchanged.
std::int64_t sample_count(double mean, PixelRng& rng, std::poisson_distribution<std::int64_t>& dist);

/// Per-step noise scaling derived from (dt, f_cut, noise_factor).
///
/// White noise of per-step variance v through the first-order low-pass with
/// coefficient alpha has output variance v * alpha / (2 - alpha). The filtered
/// log noise must equal noise_factor / N with N = rate / (2 pi f_cut), which
/// fixes v = step_variance_scale / mean_count_per_step.
struct NoiseCalibration {
  double alpha = 1.0;
  double step_variance_scale = 4.0;
};

NoiseCalibration noise_calibration(const SensorConfig& cfg);

/// Standard deviation of the extra buffer term added on top of the Poisson
/// count so the total per-step variance matches the calibration.
double buffer_noise_sigma(double mean_count, const NoiseCalibration& cal);

/// Standard deviation of the single Gaussian term used by analytic_gaussian.
double analytic_noise_sigma(double mean_count, const NoiseCalibration& cal);

/// ln(max(count, floor) / ref_count), the noiseless log conversion.
double log_intensity(double count, double ref_count);

/// Log signal for one pixel and step. `count` is the sampled photoelectron
/// count (ignored unless the mode is poisson_plus_buffer); `mean_count` is
/// rate * dt.
double log_signal(double count, double mean_count, double ref_count, NoiseMode mode,
                  const NoiseCalibration& cal, PixelRng& rng);

/// Draws the count (if the mode needs one) and the log signal.
PhotonSample sample_photon_step(double mean_count, double ref_count, NoiseMode mode,
                                const NoiseCalibration& cal, PixelRng& rng,
                                std::poisson_distribution<std::int64_t>* dist = nullptr);

}  // namespace scidvs
