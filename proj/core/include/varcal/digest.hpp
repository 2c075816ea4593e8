#pragma once

#include <string>
#include <string_view>

namespace varcal {

/// SHA-256 of the given bytes as a lowercase hex string.
std::string sha256_hex(std::string_view bytes);

/// SHA-256 of a file's contents. Throws Error when the file cannot be read.
std::string sha256_file_hex(const std::string& path);

}  // namespace varcal
