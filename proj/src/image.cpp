#include "scidvs/image.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "scidvs/core.hpp"

namespace scidvs {

namespace {

class PgmCursor {
 public:
  explicit PgmCursor(std::string_view bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long number() {
    skip_space_and_comments();
    const auto start = pos_;
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 1'000'000'000) throw FormatError("pgm: number too large");
      ++pos_;
    }
    if (pos_ == start) throw FormatError("pgm: expected a number");
    return v;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

GrayImage parse_pgm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '2'))
    throw FormatError("pgm: missing P5/P2 magic");
  const bool binary = bytes[1] == '5';
  PgmCursor cur(bytes.substr(2));
  GrayImage img;
  img.width = static_cast<int>(cur.number());
  img.height = static_cast<int>(cur.number());
  img.maxval = static_cast<int>(cur.number());
  if (img.width <= 0 || img.height <= 0) throw FormatError("pgm: non-positive dimensions");
  if (img.maxval <= 0 || img.maxval > 65535) throw FormatError("pgm: maxval out of range");
  const auto n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  img.pixels.resize(n);

  if (!binary) {
    for (auto& p : img.pixels) {
      const long v = cur.number();
      if (v > img.maxval) throw FormatError("pgm: sample exceeds maxval");
      p = static_cast<std::uint16_t>(v);
    }
    return img;
  }

  // Exactly one whitespace byte separates the header from the raster.
  const std::size_t raster = 2 + cur.pos() + 1;
  const std::size_t bpp = img.maxval > 255 ? 2 : 1;
  if (bytes.size() < raster + n * bpp) throw FormatError("pgm: truncated raster");
  for (std::size_t i = 0; i < n; ++i) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + raster + i * bpp);
    img.pixels[i] = bpp == 2 ? static_cast<std::uint16_t>((p[0] << 8) | p[1]) : p[0];
  }
  return img;
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_pgm(ss.str());
}

std::string encode_pgm(const GrayImage& image) {
  std::ostringstream os;
  os << "P5\n" << image.width << ' ' << image.height << '\n' << image.maxval << '\n';
  std::string out = os.str();
  const bool wide = image.maxval > 255;
  out.reserve(out.size() + image.pixels.size() * (wide ? 2 : 1));
  for (const auto v : image.pixels) {
    if (wide) out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xFF));
  }
  return out;
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace scidvs
