#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace slant {

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Lowercase hex SHA-256 of a file's contents. Throws slant::Error if unreadable.
std::string sha256_file(const std::filesystem::path& path);

/// First 8 bytes of the SHA-256 digest, big-endian.
std::uint64_t fingerprint64(std::string_view bytes);

std::string to_hex64(std::uint64_t value);
std::uint64_t from_hex64(std::string_view hex);

}  // namespace slant
