#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace vrsa::detail {

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB8
};

RgbImage read_png_rgb(const std::filesystem::path& path);
void write_png_rgb(const RgbImage& image, const std::filesystem::path& path);

}  // namespace vrsa::detail
