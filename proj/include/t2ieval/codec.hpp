#pragma once

#include <string>
#include <string_view>

namespace t2ieval {

/// Lowercase hex SHA-256 digest (64 characters).
std::string sha256_hex(std::string_view data);

/// Standard base64 with padding, no line breaks.
std::string base64_encode(std::string_view data);

/// Inverse of base64_encode. Throws std::invalid_argument on malformed input.
std::string base64_decode(std::string_view encoded);

}  // namespace t2ieval
