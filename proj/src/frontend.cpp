#include "scidvs/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "scidvs/pixel.hpp"

namespace scidvs {

std::int64_t sample_count(double mean, PixelRng& rng) {
  if (!(mean > 0)) return 0;
  if (mean > kGaussianBranchMean) {
    const double draw = std::round(mean + std::sqrt(mean) * rng.normal());
    return draw < 0 ? 0 : static_cast<std::int64_t>(draw);
  }
  std::poisson_distribution<std::int64_t> poisson(mean);
  return poisson(rng);
}

std::int64_t sample_count(double mean, PixelRng& rng, std::poisson_distribution<std::int64_t>& dist) {
  if (!(mean > 0) || mean > kGaussianBranchMean) return sample_count(mean, rng);
  if (dist.mean() != mean) dist.param(std::poisson_distribution<std::int64_t>::param_type(mean));
  return dist(rng);
}

std::int64_t sample_photoelectrons(double rate_eps, std::uint64_t dt_us, PixelRng& rng) {
  return sample_count(rate_eps * static_cast<double>(dt_us) * 1e-6, rng);
}

NoiseCalibration noise_calibration(const SensorConfig& cfg) {
  NoiseCalibration cal;
  cal.alpha = lowpass_alpha(cfg.dt_us, cfg.f_cut_hz);
  const double x = 2.0 * std::numbers::pi * cfg.f_cut_hz * static_cast<double>(cfg.dt_us) * 1e-6;
  cal.step_variance_scale = cfg.noise_factor * x * (2.0 - cal.alpha) / cal.alpha;
  return cal;
}

double buffer_noise_sigma(double mean_count, const NoiseCalibration& cal) {
  const double extra = std::max(cal.step_variance_scale - 1.0, 0.0);
  return std::sqrt(extra / std::max(mean_count, kCountFloor));
}

double analytic_noise_sigma(double mean_count, const NoiseCalibration& cal) {
  return std::sqrt(cal.step_variance_scale / std::max(mean_count, kCountFloor));
}

double log_intensity(double count, double ref_count) { return std::log(std::max(count, kCountFloor) / ref_count); }

double log_signal(double count, double mean_count, double ref_count, NoiseMode mode, const NoiseCalibration& cal,
                  PixelRng& rng) {
  switch (mode) {
    case NoiseMode::Off:
      return log_intensity(mean_count, ref_count);
    case NoiseMode::AnalyticGaussian:
      return log_intensity(mean_count, ref_count) + analytic_noise_sigma(mean_count, cal) * rng.normal();
    case NoiseMode::PoissonPlusBuffer:
      return log_intensity(count, ref_count) + buffer_noise_sigma(mean_count, cal) * rng.normal();
  }
  return log_intensity(mean_count, ref_count);
}

PhotonSample sample_photon_step(double mean_count, double ref_count, NoiseMode mode, const NoiseCalibration& cal,
                                PixelRng& rng, std::poisson_distribution<std::int64_t>* dist) {
  PhotonSample s;
  s.n_e = mean_count;
  if (mode == NoiseMode::PoissonPlusBuffer)
    s.n_e = static_cast<double>(dist ? sample_count(mean_count, rng, *dist) : sample_count(mean_count, rng));
  s.ell = log_signal(s.n_e, mean_count, ref_count, mode, cal, rng);
  return s;
}

}  // namespace scidvs
