#pragma once

#include <cstdint>
#include <tuple>

namespace scidvs {

enum class Polarity : std::uint8_t { Off = 0, On = 1 };

inline int sign(Polarity p) { return p == Polarity::On ? 1 : -1; }
inline Polarity opposite(Polarity p) { return p == Polarity::On ? Polarity::Off : Polarity::On; }

/// Address-event: a polarity change detected at pixel (x, y) at time t_us.
struct Event {
  std::uint64_t t_us = 0;
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  Polarity polarity = Polarity::On;

  friend bool operator==(const Event&, const Event&) = default;
};

/// Canonical stream order: time, then row, then column.
inline bool canonical_less(const Event& a, const Event& b) {
  return std::tie(a.t_us, a.y, a.x) < std::tie(b.t_us, b.y, b.x);
}

}  // namespace scidvs
