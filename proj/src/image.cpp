#include "t2ieval/image.hpp"

#include "t2ieval/errors.hpp"

#include <cstdint>
#include <fstream>
#include <iterator>

namespace t2ieval {
namespace {

std::uint32_t read_be32(std::string_view b, std::size_t at) {
  return (std::uint32_t(std::uint8_t(b[at])) << 24) | (std::uint32_t(std::uint8_t(b[at + 1])) << 16) |
         (std::uint32_t(std::uint8_t(b[at + 2])) << 8) | std::uint32_t(std::uint8_t(b[at + 3]));
}

std::uint16_t read_be16(std::string_view b, std::size_t at) {
  return std::uint16_t((std::uint16_t(std::uint8_t(b[at])) << 8) | std::uint8_t(b[at + 1]));
}

ImageDimensions sniff_png(std::string_view b) {
  // 8-byte signature, then IHDR: length(4) "IHDR"(4) width(4) height(4)
  if (b.size() < 24 || b.substr(12, 4) != "IHDR") throw ImageDecodeError("truncated PNG header");
  const auto w = read_be32(b, 16);
  const auto h = read_be32(b, 20);
  if (w == 0 || h == 0 || w > 1u << 30 || h > 1u << 30) throw ImageDecodeError("invalid PNG dimensions");
  return {int(w), int(h)};
}

ImageDimensions sniff_jpeg(std::string_view b) {
  std::size_t pos = 2;
  while (pos + 4 <= b.size()) {
    if (std::uint8_t(b[pos]) != 0xFF) throw ImageDecodeError("corrupt JPEG marker stream");
    const std::uint8_t marker = std::uint8_t(b[pos + 1]);
    if (marker == 0xFF) {  // fill byte
      ++pos;
      continue;
    }
    if (marker == 0xD8 || (marker >= 0xD0 && marker <= 0xD7) || marker == 0x01) {
      pos += 2;
      continue;
    }
    const std::uint16_t len = read_be16(b, pos + 2);
    const bool is_sof = marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 && marker != 0xC8 && marker != 0xCC;
    if (is_sof) {
      if (pos + 9 > b.size()) break;
      const int h = read_be16(b, pos + 5);
      const int w = read_be16(b, pos + 7);
      if (w == 0 || h == 0) throw ImageDecodeError("invalid JPEG dimensions");
      return {w, h};
    }
    pos += 2 + len;
  }
  throw ImageDecodeError("JPEG without frame header");
}

}  // namespace

ImageDimensions sniff_dimensions(std::string_view bytes) {
  static constexpr std::string_view kPngSig("\x89PNG\r\n\x1a\n", 8);
  if (bytes.substr(0, 8) == kPngSig) return sniff_png(bytes);
  if (bytes.size() >= 3 && std::uint8_t(bytes[0]) == 0xFF && std::uint8_t(bytes[1]) == 0xD8) return sniff_jpeg(bytes);
  throw ImageDecodeError("unsupported image format (expected PNG or JPEG)");
}

ImageInput load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageDecodeError("cannot open image " + path.string());
  std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  ImageDimensions dims;
  try {
    dims = sniff_dimensions(bytes);
  } catch (const ImageDecodeError& e) {
    throw ImageDecodeError(path.string() + ": " + e.what());
  }
  return {std::move(bytes), dims.width, dims.height};
}

}  // namespace t2ieval
