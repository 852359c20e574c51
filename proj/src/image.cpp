#include "vsls/image.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstring>

#include "vsls/error.hpp"
#include "vsls/io.hpp"

namespace vsls {

GrayImage to_gray(const RgbImage& rgb) {
  GrayImage out(rgb.width, rgb.height);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    out.pixels[i] = 0.299 * rgb.data[3 * i] + 0.587 * rgb.data[3 * i + 1] + 0.114 * rgb.data[3 * i + 2];
  }
  return out;
}

std::vector<std::uint8_t> encode_png(const GrayImage& image) {
  std::vector<std::uint8_t> raw(image.pixels.size());
  const double scale = 255.0 / image.dynamic_range;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = static_cast<std::uint8_t>(std::clamp(std::lround(image.pixels[i] * scale), 0L, 255L));
  }
  png_image info;
  std::memset(&info, 0, sizeof(info));
  info.version = PNG_IMAGE_VERSION;
  info.width = static_cast<png_uint_32>(image.width);
  info.height = static_cast<png_uint_32>(image.height);
  info.format = PNG_FORMAT_GRAY;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&info, nullptr, &size, 0, raw.data(), 0, nullptr)) {
    throw Error(ErrorCode::Io, std::string("PNG encode failed: ") + info.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&info, out.data(), &size, 0, raw.data(), 0, nullptr)) {
    throw Error(ErrorCode::Io, std::string("PNG encode failed: ") + info.message);
  }
  out.resize(size);
  return out;
}

GrayImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image info;
  std::memset(&info, 0, sizeof(info));
  info.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&info, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::Io, std::string("PNG decode failed: ") + info.message);
  }
  if (!(info.format & PNG_FORMAT_FLAG_COLOR)) {
    // Gray sources are read as-is so levels survive the round trip exactly.
    info.format = PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(info));
    if (!png_image_finish_read(&info, nullptr, raw.data(), 0, nullptr)) {
      png_image_free(&info);
      throw Error(ErrorCode::Io, std::string("PNG decode failed: ") + info.message);
    }
    GrayImage out(static_cast<int>(info.width), static_cast<int>(info.height));
    std::copy(raw.begin(), raw.end(), out.pixels.begin());
    return out;
  }
  info.format = PNG_FORMAT_RGB;
  RgbImage rgb{static_cast<int>(info.width), static_cast<int>(info.height), {}};
  rgb.data.resize(PNG_IMAGE_SIZE(info));
  if (!png_image_finish_read(&info, nullptr, rgb.data.data(), 0, nullptr)) {
    png_image_free(&info);
    throw Error(ErrorCode::Io, std::string("PNG decode failed: ") + info.message);
  }
  return to_gray(rgb);
}

GrayImage read_png(const std::filesystem::path& path) {
  const std::string data = read_text_file(path);
  return decode_png(std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

void write_png(const std::filesystem::path& path, const GrayImage& image) {
  const auto bytes = encode_png(image);
  write_text_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

namespace {
constexpr std::string_view kAlphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i < bytes.size()) {
    std::uint32_t v = bytes[i] << 16;
    if (i + 1 < bytes.size()) v |= bytes[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  std::array<int, 256> lookup;
  lookup.fill(-1);
  for (std::size_t i = 0; i < kAlphabet.size(); ++i) lookup[static_cast<unsigned char>(kAlphabet[i])] = static_cast<int>(i);

  std::vector<std::uint8_t> out;
  std::uint32_t acc = 0;
  int bits = 0;
  for (const char c : text) {
    if (c == '=') break;
    const int v = lookup[static_cast<unsigned char>(c)];
    if (v < 0) {
      if (std::isspace(static_cast<unsigned char>(c))) continue;
      throw Error(ErrorCode::ProtocolError, "invalid base64 character");
    }
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
    }
  }
  return out;
}

void blit(GrayImage& canvas, const GrayImage& tile, int x, int y) {
  for (int ty = 0; ty < tile.height; ++ty) {
    const int cy = y + ty;
    if (cy < 0 || cy >= canvas.height) continue;
    for (int tx = 0; tx < tile.width; ++tx) {
      const int cx = x + tx;
      if (cx < 0 || cx >= canvas.width) continue;
      canvas.at(cx, cy) = tile.at(tx, ty);
    }
  }
}

}  // namespace vsls
