#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace t2ieval {

struct ImageDimensions {
  int width = 0;
  int height = 0;
};

/// Encoded image bytes plus their pixel dimensions.
struct ImageInput {
  std::string bytes;
  int width = 0;
  int height = 0;
};

// Reads width/height from a PNG (IHDR) or baseline/progressive JPEG (SOFn)
// header. Throws ImageDecodeError for anything else or truncated headers.
ImageDimensions sniff_dimensions(std::string_view bytes);

/// Load an image file and validate its header. Throws ImageDecodeError.
ImageInput load_image(const std::filesystem::path& path);

}  // namespace t2ieval
