#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vsls {

// Row-major single-channel raster. `dynamic_range` is the span of representable
// values (255 for 8-bit data).
struct GrayImage {
  int width = 0;
  int height = 0;
  double dynamic_range = 255.0;
  std::vector<double> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, double fill = 0.0, double range = 255.0)
      : width(w), height(h), dynamic_range(range), pixels(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const GrayImage&) const = default;
};

// Interleaved RGB, 8 bits per channel.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;
};

// Luma conversion with weights (0.299, 0.587, 0.114).
GrayImage to_gray(const RgbImage& rgb);

std::vector<std::uint8_t> encode_png(const GrayImage& image);
// Any PNG color type; color data is reduced to luma with to_gray().
GrayImage decode_png(std::span<const std::uint8_t> bytes);
GrayImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const GrayImage& image);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

// Pastes `tile` with its top-left corner at (x, y).
void blit(GrayImage& canvas, const GrayImage& tile, int x, int y);

}  // namespace vsls
