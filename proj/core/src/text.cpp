#include "demb/text.hpp"

namespace demb {

namespace {

// Returns the sequence length for a lead byte, 0 if invalid.
int utf8_seq_len(unsigned char b) {
    if (b < 0x80) return 1;
    if ((b & 0xE0) == 0xC0) return 2;
    if ((b & 0xF0) == 0xE0) return 3;
    if ((b & 0xF8) == 0xF0) return 4;
    return 0;
}

}  // namespace

bool is_valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const unsigned char b = static_cast<unsigned char>(s[i]);
        const int len = utf8_seq_len(b);
        if (len == 0) return false;
        if (len == 1) {
            ++i;
            continue;
        }
        if (i + static_cast<std::size_t>(len) > s.size()) return false;
        std::uint32_t cp = b & (0xFF >> (len + 1));
        for (int k = 1; k < len; ++k) {
            const unsigned char c = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
            if ((c & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (c & 0x3F);
        }
        // Reject overlong encodings, surrogates and out-of-range points.
        if (len == 2 && cp < 0x80) return false;
        if (len == 3 && cp < 0x800) return false;
        if (len == 4 && cp < 0x10000) return false;
        if (cp >= 0xD800 && cp <= 0xDFFF) return false;
        if (cp > 0x10FFFF) return false;
        i += static_cast<std::size_t>(len);
    }
    return true;
}

std::size_t count_codepoints(std::string_view s) {
    std::size_t n = 0;
    for (char c : s) {
        if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
    }
    return n;
}

std::vector<std::string_view> codepoints(std::string_view s) {
    std::vector<std::string_view> out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        int len = utf8_seq_len(static_cast<unsigned char>(s[i]));
        if (len <= 0) len = 1;
        const std::size_t take = std::min(static_cast<std::size_t>(len), s.size() - i);
        out.push_back(s.substr(i, take));
        i += take;
    }
    return out;
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = ascii_lower(c);
    return out;
}

std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (ascii_space(s[i]) || s[i] == '\n' || s[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < s.size() && !(ascii_space(s[j]) || s[j] == '\n' || s[j] == '\r')) ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

std::size_t word_count(std::string_view s) { return split_words(s).size(); }

}  // namespace demb
