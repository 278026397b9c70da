#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace scidvs {

/// Grayscale raster, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  int maxval = 255;
  std::vector<std::uint16_t> pixels;

  std::uint16_t at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
};

/// Reads binary (P5) or plain (P2) PGM. maxval up to 65535.
GrayImage parse_pgm(std::string_view bytes);
GrayImage read_pgm(const std::filesystem::path& path);

/// Binary PGM; 16-bit big-endian samples when maxval > 255.
std::string encode_pgm(const GrayImage& image);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace scidvs
