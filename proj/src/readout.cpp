#include "scidvs/readout.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>

#include "scidvs/frontend.hpp"

namespace scidvs {

namespace {

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(std::string_view in, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint64_t{static_cast<unsigned char>(in[pos + i])} << (8 * i);
  return v;
}

template <typename T>
T parse_field(std::string_view field, std::size_t line_no) {
  T v{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw FormatError("csv line " + std::to_string(line_no) + ": bad field '" + std::string(field) + "'");
  return v;
}

EventFile parse_csv(std::string_view bytes) {
  EventFile file;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < bytes.size()) {
    auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) nl = bytes.size();
    std::string_view line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    std::string_view fields[4];
    std::size_t start = 0;
    for (int f = 0; f < 4; ++f) {
      const auto comma = line.find(',', start);
      if ((f < 3) == (comma == std::string_view::npos))
        throw FormatError("csv line " + std::to_string(line_no) + ": expected t_us,x,y,p");
      fields[f] = line.substr(start, f < 3 ? comma - start : std::string_view::npos);
      start = comma + 1;
    }
    Event e;
    e.t_us = parse_field<std::uint64_t>(fields[0], line_no);
    e.x = parse_field<std::uint16_t>(fields[1], line_no);
    e.y = parse_field<std::uint16_t>(fields[2], line_no);
    const auto p = parse_field<unsigned>(fields[3], line_no);
    if (p > 1) throw FormatError("csv line " + std::to_string(line_no) + ": polarity must be 0 or 1");
    e.polarity = p == 1 ? Polarity::On : Polarity::Off;
    file.events.push_back(e);
  }
  return file;
}

EventFile parse_binary(std::string_view bytes) {
  if (bytes.size() < kEventHeaderBytes) throw FormatError("event file: truncated header");
  if (bytes.substr(0, 4) != "SDVS") throw FormatError("event file: bad magic");
  const auto version = get_le(bytes, 4, 2);
  if (version != kEventFileVersion) throw FormatError("event file: unsupported version " + std::to_string(version));
  for (std::size_t i = 10; i < kEventHeaderBytes; ++i)
    if (bytes[i] != 0) throw FormatError("event file: reserved header bytes must be zero");

  EventFile file;
  file.width = static_cast<int>(get_le(bytes, 6, 2));
  file.height = static_cast<int>(get_le(bytes, 8, 2));
  const std::size_t body = bytes.size() - kEventHeaderBytes;
  if (body % kEventRecordBytes != 0) throw FormatError("event file: truncated record");
  const std::size_t n = body / kEventRecordBytes;
  file.events.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t at = kEventHeaderBytes + r * kEventRecordBytes;
    Event e;
    e.t_us = get_le(bytes, at, 8);
    e.x = static_cast<std::uint16_t>(get_le(bytes, at + 8, 2));
    e.y = static_cast<std::uint16_t>(get_le(bytes, at + 10, 2));
    const auto p = static_cast<unsigned char>(bytes[at + 12]);
    if (p > 1) throw FormatError("event file: record " + std::to_string(r) + " has polarity " + std::to_string(p));
    e.polarity = p == 1 ? Polarity::On : Polarity::Off;
    file.events.push_back(e);
  }
  return file;
}

}  // namespace

std::string serialize_events(std::span<const Event> events, EventFormat format, int width, int height) {
  std::string out;
  if (format == EventFormat::Csv) {
    out.reserve(events.size() * 20);
    char buf[24];
    auto field = [&](std::uint64_t v, char sep) {
      const auto r = std::to_chars(buf, buf + sizeof buf, v);
      out.append(buf, r.ptr);
      out.push_back(sep);
    };
    for (const auto& e : events) {
      field(e.t_us, ',');
      field(e.x, ',');
      field(e.y, ',');
      out.push_back(e.polarity == Polarity::On ? '1' : '0');
      out.push_back('\n');
    }
    return out;
  }

  out.reserve(kEventHeaderBytes + events.size() * kEventRecordBytes);
  out.append("SDVS");
  put_le(out, kEventFileVersion, 2);
  put_le(out, static_cast<std::uint64_t>(width), 2);
  put_le(out, static_cast<std::uint64_t>(height), 2);
  out.append(6, '\0');
  for (const auto& e : events) {
    put_le(out, e.t_us, 8);
    put_le(out, e.x, 2);
    put_le(out, e.y, 2);
    out.push_back(e.polarity == Polarity::On ? 1 : 0);
  }
  return out;
}

EventFile deserialize_events(std::string_view bytes, EventFormat format) {
  return format == EventFormat::Csv ? parse_csv(bytes) : parse_binary(bytes);
}

bool is_canonical(std::span<const Event> events) {
  return std::adjacent_find(events.begin(), events.end(), [](const Event& a, const Event& b) {
           return !canonical_less(a, b);
         }) == events.end();
}

AccumulationFrame accumulate(std::span<const Event> events, std::uint64_t t0_us, std::uint64_t window_us, int width,
                             int height) {
  if (window_us == 0) throw PreconditionError("accumulate: window must be > 0");
  AccumulationFrame f;
  f.width = width;
  f.height = height;
  f.t0_us = t0_us;
  f.window_us = window_us;
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  f.on.assign(n, 0);
  f.off.assign(n, 0);
  for (const auto& e : events) {
    if (e.t_us < t0_us || e.t_us - t0_us >= window_us) continue;
    if (e.x >= width || e.y >= height) continue;
    const auto i = static_cast<std::size_t>(e.y) * static_cast<std::size_t>(width) + e.x;
    ++(e.polarity == Polarity::On ? f.on : f.off)[i];
  }
  return f;
}

GrayImage accumulation_to_image(const AccumulationFrame& frame) {
  GrayImage img;
  img.width = frame.width;
  img.height = frame.height;
  img.maxval = 255;
  img.pixels.resize(frame.on.size());
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x)
      img.pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(frame.width) + static_cast<std::size_t>(x)] =
          static_cast<std::uint16_t>(std::clamp<std::int64_t>(128 + frame.signed_at(x, y), 0, 255));
  return img;
}

ApsFrame capture_aps(const SceneSpec& scene, std::uint64_t t_us, std::uint64_t exposure_us, const SensorConfig& cfg) {
  if (exposure_us == 0) throw PreconditionError("capture_aps: exposure must be > 0");
  ApsFrame frame;
  frame.width = cfg.width;
  frame.height = cfg.height;
  frame.exposure_us = exposure_us;
  frame.values.resize(static_cast<std::size_t>(cfg.width) * static_cast<std::size_t>(cfg.height));
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      double mean = 0;
      for (std::uint64_t t = 0; t < exposure_us; t += cfg.dt_us) {
        const auto slice = std::min(cfg.dt_us, exposure_us - t);
        mean += photoelectron_rate(illuminance_at(scene, x, y, t_us + t), cfg, false) *
                static_cast<double>(slice) * 1e-6;
      }
      auto rng = pixel_rng_stream(cfg.seed, x, y, cfg.width, cfg.height, StreamTag::Aps, t_us);
      const double n = static_cast<double>(sample_count(mean, rng));
      const double code = std::round(std::min(1.0, n / cfg.aps_fullwell_e) * kApsMaxCode);
      frame.values[static_cast<std::size_t>(y) * static_cast<std::size_t>(cfg.width) + static_cast<std::size_t>(x)] =
          static_cast<std::uint16_t>(code);
    }
  }
  return frame;
}

GrayImage aps_to_image(const ApsFrame& frame) {
  GrayImage img;
  img.width = frame.width;
  img.height = frame.height;
  img.maxval = kApsMaxCode;
  img.pixels = frame.values;
  return img;
}

}  // namespace scidvs
