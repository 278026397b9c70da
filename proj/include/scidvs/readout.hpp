#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scidvs/core.hpp"
#include "scidvs/event.hpp"
#include "scidvs/image.hpp"
#include "scidvs/stimulus.hpp"

namespace scidvs {

enum class EventFormat { Csv, Binary };

/// Binary layout: 16-byte header ("SDVS", u16 version, u16 width, u16 height,
/// 6 zero bytes) then 13-byte little-endian records (u64 t_us, u16 x, u16 y,
/// u8 polarity).
inline constexpr std::uint16_t kEventFileVersion = 1;
inline constexpr std::size_t kEventHeaderBytes = 16;
inline constexpr std::size_t kEventRecordBytes = 13;

struct EventFile {
  int width = 0;  // 0 for CSV, which carries no geometry
  int height = 0;
  std::vector<Event> events;
};

/// CSV is one `t_us,x,y,p` line per event (p = 1 for ON); no header.
std::string serialize_events(std::span<const Event> events, EventFormat format, int width = 0, int height = 0);

/// Throws FormatError on a bad header, truncated record or malformed line.
EventFile deserialize_events(std::string_view bytes, EventFormat format);

bool is_canonical(std::span<const Event> events);

/// ON/OFF event counts per pixel over [t0, t0 + window).
struct AccumulationFrame {
  int width = 0;
  int height = 0;
  std::uint64_t t0_us = 0;
  std::uint64_t window_us = 0;
  std::vector<std::uint32_t> on;
  std::vector<std::uint32_t> off;

  std::int64_t signed_at(int x, int y) const {
    const auto i = static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
    return static_cast<std::int64_t>(on[i]) - static_cast<std::int64_t>(off[i]);
  }
};

AccumulationFrame accumulate(std::span<const Event> events, std::uint64_t t0_us, std::uint64_t window_us, int width,
                             int height);

/// Signed plane shifted to a midpoint of 128 and clipped to [0, 255].
GrayImage accumulation_to_image(const AccumulationFrame& frame);

/// Global-shutter 9-bit snapshot.
struct ApsFrame {
  int width = 0;
  int height = 0;
  std::uint64_t exposure_us = 0;
  std::vector<std::uint16_t> values;  // [0, 511]
};

inline constexpr int kApsMaxCode = 511;

/// Integrates Poisson photoelectrons over [t_us, t_us + exposure_us) and maps
/// min(1, N / full well) onto 0..511. Reads the scene only; never touches
/// event-simulation state.
ApsFrame capture_aps(const SceneSpec& scene, std::uint64_t t_us, std::uint64_t exposure_us, const SensorConfig& cfg);

GrayImage aps_to_image(const ApsFrame& frame);

}  // namespace scidvs
