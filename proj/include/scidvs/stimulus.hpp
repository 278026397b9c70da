#pragma once

#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include "scidvs/config_file.hpp"
#include "scidvs/core.hpp"
#include "scidvs/event.hpp"
#include "scidvs/image.hpp"

namespace scidvs {

/// Visible photons per lux per second per square micrometre.
inline constexpr double kPhotonsPerLuxSecondUm2 = 1.0e4;

struct ConstantScene {
  double lux = 1.0;
};

/// Reset pulse followed by a test step. Illuminance is `base_lux` except on
/// [t_reset_us, t_reset_us + reset duration), where it is base*(1+reset_contrast),
/// and from t_test_us on, where it is base*(1+test_contrast).
struct StepProtocol {
  double base_lux = 40.0;
  double reset_contrast = 0.60;
  double test_contrast = 0.0;
  std::uint64_t t_reset_us = 0;
  /// 0 selects half the gap between t_reset_us and t_test_us.
  std::uint64_t reset_duration_us = 0;
  std::uint64_t t_test_us = 0;
  std::uint64_t t_window_us = 200'000;

  std::uint64_t reset_end_us() const {
    const auto gap = t_test_us > t_reset_us ? t_test_us - t_reset_us : 0;
    return t_reset_us + (reset_duration_us != 0 ? reset_duration_us : gap / 2);
  }
};

struct ChartWedge {
  double contrast = 0.01;  // magnitude of the test edge, in (0, 1)
  Polarity polarity = Polarity::On;
};

/// Disk of angular wedges rotating about (center_x, center_y). Each wedge is
/// seen by a pixel as three consecutive sub-sectors: background B, reset level
/// R = B(1 - s*r) and test level T = R(1 + s*C), where s = +1 for an ON test
/// edge and -1 for OFF. The B->R edge is a large opposite-polarity reset edge,
/// the R->T edge is the low-contrast test edge.
struct RotatingChart {
  double base_lux = 0.7;
  std::vector<ChartWedge> wedges;
  double reset_edge_contrast = 0.20;
  double rotation_hz = 5.0;
  double center_x = 0.0;
  double center_y = 0.0;
  double background_fraction = 0.1;
  double reset_fraction = 0.45;

  double period_us() const { return 1.0e6 / rotation_hz; }
  double test_fraction() const { return 1.0 - background_fraction - reset_fraction; }
};

/// Binary mask translating at constant velocity, tiled periodically. Mask
/// pixels above half of maxval are pattern; illuminance there is
/// base*(1+pattern_contrast).
struct MovingPattern {
  double base_lux = 1.0;
  GrayImage mask;
  double velocity_x = 0.0;  // px/s
  double velocity_y = 0.0;  // px/s
  double pattern_contrast = 0.5;
};

/// Multiplies illuminance by `factor` on [x0, x1) x [y0, y1).
struct RegionAttenuation {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;
  double factor = 0.25;
};

struct SceneSpec {
  std::variant<ConstantScene, StepProtocol, RotatingChart, MovingPattern> pattern{ConstantScene{}};
  std::vector<RegionAttenuation> attenuations;
};

/// Every violated scene invariant, empty when valid.
std::vector<std::string> scene_violations(const SceneSpec& scene);
SceneSpec validate_scene(const SceneSpec& scene);

/// Chip illuminance in lux at pixel (x, y) and time t_us.
double illuminance_at(const SceneSpec& scene, int x, int y, std::uint64_t t_us);

/// Photoelectrons per second collected by one pixel (or by a 2x2 group when
/// `binned`) at `lux`.
double photoelectron_rate(double lux, const SensorConfig& cfg, bool binned);

enum class ChartSector { Background, Reset, Test };

/// Where a pixel sits on the rotating chart at time t: which revolution,
/// which wedge and which sub-sector.
struct ChartPhase {
  std::int64_t revolution = 0;
  int wedge = 0;
  ChartSector sector = ChartSector::Background;
};

ChartPhase chart_phase(const RotatingChart& chart, int x, int y, std::uint64_t t_us);
/// Phase of the chart point at polar angle `phi` (radians, not wrapped).
ChartPhase chart_phase_at(const RotatingChart& chart, double phi, std::uint64_t t_us);

/// Chart whose rotation centre is the array centre.
RotatingChart centered_chart(const SensorConfig& cfg, double base_lux, std::vector<ChartWedge> wedges);

/// Reads `scene.*` keys. Keys that belong to the sensor config are ignored;
/// any other key is an error. Relative mask paths resolve against `base_dir`.
SceneSpec scene_from_key_values(const KeyValues& kv, const SensorConfig& cfg,
                                const std::filesystem::path& base_dir = {});

}  // namespace scidvs
