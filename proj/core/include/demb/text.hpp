#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace demb {

// Byte-level UTF-8 helpers. Classification is ASCII-only: multi-byte
// sequences count as non-alphanumeric, which is the right bias for the
// RFC-style sources this pipeline ingests.

bool is_valid_utf8(std::string_view s);

// Number of code points. Assumes valid UTF-8.
std::size_t count_codepoints(std::string_view s);

// Splits into code points, each returned as its byte slice.
std::vector<std::string_view> codepoints(std::string_view s);

inline bool ascii_alnum(char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
inline bool ascii_alpha(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
inline bool ascii_space(char c) { return c == ' ' || c == '\t'; }

inline char ascii_lower(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

std::string to_lower(std::string_view s);

// Whitespace-delimited words (any of space, tab, newline, carriage return).
std::vector<std::string> split_words(std::string_view s);

std::size_t word_count(std::string_view s);

}  // namespace demb
