#pragma once

// Stand-alone single-pixel model used as a test oracle. Written from the
// model equations with its own random source; shares no code with the
// library beyond plain types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>

namespace oracle {

struct PixelParams {
  double gain = 7.0;
  double sat = 3.45;
  bool preamp = true;
  bool auto_center = true;
  double theta_on = 0.119;
  double theta_off = 0.119;
  std::uint64_t refractory_us = 1000;
  double f_cut_hz = 18.0;
  std::uint64_t dt_us = 100;
  double noise_factor = 2.0;
};

inline double alpha_of(const PixelParams& p) {
  return 1.0 - std::exp(-2.0 * std::numbers::pi * p.f_cut_hz * static_cast<double>(p.dt_us) * 1e-6);
}

// Per-step log variance times the mean count, so that the filtered variance is
// noise_factor / (photoelectrons per 1/(2 pi f_cut)).
inline double step_scale(const PixelParams& p) {
  const double a = alpha_of(p);
  const double x = 2.0 * std::numbers::pi * p.f_cut_hz * static_cast<double>(p.dt_us) * 1e-6;
  return p.noise_factor * x * (2.0 - a) / a;
}

struct ScalarPixel {
  PixelParams p;
  double alpha = 0;
  double ell = 0;
  double center = 0;
  double vmem = 0;
  std::uint64_t until = 0;

  ScalarPixel(const PixelParams& params, double ell0) : p(params), alpha(alpha_of(params)) { rest(ell0); }

  void rest(double ell0) {
    ell = ell0;
    center = ell0;
    vmem = out();
    until = 0;
  }

  void reset_detector() {
    if (p.preamp && p.auto_center) center = ell;
    vmem = out();
    until = 0;
  }

  double out() const { return p.preamp ? std::clamp(p.gain * (ell - center), -p.sat, p.sat) : ell; }

  // +1 ON, -1 OFF, 0 none.
  int step(double input, std::uint64_t t_us) {
    ell += alpha * (input - ell);
    if (t_us < until) return 0;
    const double v = out();
    const double up = v - vmem;
    const double down = vmem - v;
    const bool on = up >= p.theta_on;
    const bool off = down >= p.theta_off;
    if (!on && !off) return 0;
    int pol = on ? 1 : -1;
    if (on && off) pol = up / p.theta_on >= down / p.theta_off ? 1 : -1;
    vmem = v;
    until = t_us + p.refractory_us;
    if (p.preamp && p.auto_center) {
      center = ell;
      vmem = out();
    }
    return pol;
  }
};

// Noisy log input for one step with mean count `mu` (already summed over a
// bin group if binned).
struct NoisyInput {
  std::mt19937_64 gen;
  double scale;
  explicit NoisyInput(const PixelParams& p, std::uint64_t seed) : gen(seed), scale(step_scale(p)) {}

  double operator()(double mu) {
    const double n = static_cast<double>(std::poisson_distribution<long long>(mu)(gen));
    const double sd = std::sqrt(std::max(scale - 1.0, 0.0) / std::max(mu, 0.5));
    return std::log(std::max(n, 0.5)) + sd * std::normal_distribution<double>(0.0, 1.0)(gen);
  }
};

}  // namespace oracle
