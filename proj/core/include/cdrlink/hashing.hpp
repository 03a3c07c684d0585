#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace cdrlink {

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// SHA-256 of a file's bytes; throws std::runtime_error if unreadable.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace cdrlink
