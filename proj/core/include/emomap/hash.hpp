#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace emomap {

using Sha256Digest = std::array<std::uint8_t, 32>;

Sha256Digest sha256(std::string_view data);

/// Lowercase hex of a SHA-256 digest.
std::string to_hex(const Sha256Digest& digest);

std::string sha256_hex(std::string_view data);

/// SHA-256 of a file's bytes as hex. Throws IoError if unreadable.
std::string sha256_file(const std::string& path);

}  // namespace emomap
