#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace newsforge {

std::string ascii_lower(std::string_view s);
std::string ascii_upper(std::string_view s);
std::string trim(std::string_view s);
/// Trims and replaces every whitespace run with a single space.
std::string collapse_whitespace(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);

/// Unicode NFC normalization. Invalid UTF-8 is replaced with U+FFFD.
std::string nfc(std::string_view utf8);

std::string sha256_hex(std::string_view data);

}  // namespace newsforge
