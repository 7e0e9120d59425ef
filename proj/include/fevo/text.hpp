#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fevo::text {

// Minimal UTF-8 handling; malformed bytes decode as U+FFFD one byte at a time
// so no input can make the decoders throw.

struct Codepoint {
    char32_t value;
    std::size_t offset;  // byte offset in the source string
    std::size_t size;    // bytes consumed
};

inline Codepoint decode_utf8(std::string_view s, std::size_t pos) {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    auto cont = [&](std::size_t k) {
        return pos + k < s.size() &&
               (static_cast<unsigned char>(s[pos + k]) & 0xC0u) == 0x80u;
    };
    auto bits = [&](std::size_t k) {
        return static_cast<char32_t>(static_cast<unsigned char>(s[pos + k]) & 0x3Fu);
    };
    if (b0 < 0x80u) return {b0, pos, 1};
    if ((b0 & 0xE0u) == 0xC0u && cont(1))
        return {static_cast<char32_t>((b0 & 0x1Fu) << 6) | bits(1), pos, 2};
    if ((b0 & 0xF0u) == 0xE0u && cont(1) && cont(2))
        return {static_cast<char32_t>((b0 & 0x0Fu) << 12) | (bits(1) << 6) | bits(2), pos, 3};
    if ((b0 & 0xF8u) == 0xF0u && cont(1) && cont(2) && cont(3))
        return {static_cast<char32_t>((b0 & 0x07u) << 18) | (bits(1) << 12) | (bits(2) << 6) | bits(3),
                pos, 4};
    return {0xFFFD, pos, 1};
}

template <typename Fn>
void for_each_codepoint(std::string_view s, Fn&& fn) {
    std::size_t pos = 0;
    while (pos < s.size()) {
        Codepoint cp = decode_utf8(s, pos);
        fn(cp);
        pos += cp.size;
    }
}

inline std::size_t codepoint_count(std::string_view s) {
    std::size_t n = 0;
    for_each_codepoint(s, [&](const Codepoint&) { ++n; });
    return n;
}

inline std::vector<char32_t> codepoints(std::string_view s) {
    std::vector<char32_t> out;
    out.reserve(s.size());
    for_each_codepoint(s, [&](const Codepoint& cp) { out.push_back(cp.value); });
    return out;
}

inline void append_utf8(std::string& out, char32_t c) {
    if (c < 0x80) {
        out.push_back(static_cast<char>(c));
    } else if (c < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (c >> 6)));
        out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else if (c < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (c >> 12)));
        out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (c >> 18)));
        out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
}

inline bool is_space_cp(char32_t c) {
    return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' ||
           c == U'\v' || c == 0x3000;  // ideographic space
}

/// CJK unified ideographs (base block, extension A, compatibility block).
inline bool is_cjk(char32_t c) {
    return (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF) ||
           (c >= 0xF900 && c <= 0xFAFF);
}

/// Latin letters: ASCII plus Latin-1 supplement and Latin Extended-A/B.
inline bool is_latin_letter(char32_t c) {
    if ((c >= U'A' && c <= U'Z') || (c >= U'a' && c <= U'z')) return true;
    if (c >= 0xC0 && c <= 0xFF && c != 0xD7 && c != 0xF7) return true;
    return c >= 0x100 && c <= 0x24F;
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

/// Collapses runs of whitespace (ASCII + ideographic space) to single spaces
/// and trims the ends.
inline std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for_each_codepoint(s, [&](const Codepoint& cp) {
        if (is_space_cp(cp.value)) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            out.append(s.substr(cp.offset, cp.size));
        }
    });
    return out;
}

inline std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    return out;
}

inline bool contains(std::string_view haystack, std::string_view needle) {
    return haystack.find(needle) != std::string_view::npos;
}

inline bool contains_ci(std::string_view haystack, std::string_view needle) {
    return contains(to_lower_ascii(haystack), to_lower_ascii(needle));
}

/// Parses a plain decimal number; grouping commas between digits are dropped.
inline std::optional<double> parse_plain_number(std::string_view s) {
    std::string cleaned;
    cleaned.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == ',' && i > 0 && i + 1 < s.size() &&
            std::isdigit(static_cast<unsigned char>(s[i - 1])) &&
            std::isdigit(static_cast<unsigned char>(s[i + 1]))) {
            continue;
        }
        cleaned.push_back(s[i]);
    }
    if (cleaned.empty()) return std::nullopt;
    if (cleaned.front() == '+') cleaned.erase(cleaned.begin());
    double value = 0.0;
    const char* first = cleaned.data();
    const char* last = first + cleaned.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) return std::nullopt;
    return value;
}

/// Numeric answer parsing: plain decimal, percent ("x%" -> x/100), or a
/// simple fraction "a/b".
inline std::optional<double> parse_number(std::string_view raw) {
    std::string s = trim(raw);
    if (s.empty()) return std::nullopt;
    if (auto v = parse_plain_number(s)) return v;
    // percent: ASCII '%' or full-width U+FF05
    if (s.size() >= 1 && s.back() == '%') {
        if (auto v = parse_plain_number(trim(std::string_view(s).substr(0, s.size() - 1))))
            return *v / 100.0;
    }
    if (s.size() >= 3 && s.compare(s.size() - 3, 3, "\xEF\xBC\x85") == 0) {
        if (auto v = parse_plain_number(trim(std::string_view(s).substr(0, s.size() - 3))))
            return *v / 100.0;
    }
    if (auto slash = s.find('/'); slash != std::string::npos && s.rfind('/') == slash) {
        auto num = parse_plain_number(trim(std::string_view(s).substr(0, slash)));
        auto den = parse_plain_number(trim(std::string_view(s).substr(slash + 1)));
        if (num && den && *den != 0.0) return *num / *den;
    }
    return std::nullopt;
}

}  // namespace fevo::text
