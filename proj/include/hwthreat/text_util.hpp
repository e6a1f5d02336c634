#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace hwthreat::text {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
bool is_blank(std::string_view s);

// Trim, then collapse every internal whitespace run into one space.
std::string collapse_whitespace(std::string_view s);

// Case-insensitive (ASCII) substring test.
bool contains_ci(std::string_view haystack, std::string_view needle);

// Lowercase alphanumeric word tokens ('_' and '-' kept inside words).
std::vector<std::string> word_tokens(std::string_view s);

std::string sha256_hex(std::string_view data);
std::uint64_t fnv1a64(std::string_view data);

// Byte offset of every code point start in a valid UTF-8 string.
std::vector<std::size_t> utf8_offsets(std::string_view s);

}  // namespace hwthreat::text
