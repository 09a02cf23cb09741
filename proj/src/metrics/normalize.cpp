#include "pearl/metrics/normalize.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <stdexcept>

namespace pearl::metrics {

std::string_view to_string(MetricMode m) { return m == MetricMode::strict ? "strict" : "modified"; }
std::string_view to_string(MetricLevel l) { return l == MetricLevel::word ? "word" : "char"; }

MetricMode mode_from_string(std::string_view s) {
    if (s == "strict") return MetricMode::strict;
    if (s == "modified") return MetricMode::modified;
    throw std::invalid_argument("unknown metric mode: " + std::string(s));
}

MetricLevel level_from_string(std::string_view s) {
    if (s == "word") return MetricLevel::word;
    if (s == "char" || s == "character") return MetricLevel::character;
    throw std::invalid_argument("unknown metric level: " + std::string(s));
}

std::u32string to_utf32(std::string_view utf8) {
    std::u32string out;
    out.reserve(utf8.size());
    const auto* s = reinterpret_cast<const std::uint8_t*>(utf8.data());
    const auto length = static_cast<std::int32_t>(utf8.size());
    std::int32_t i = 0;
    while (i < length) {
        UChar32 c;
        U8_NEXT(s, i, length, c);
        out.push_back(c < 0 ? U'\uFFFD' : static_cast<char32_t>(c));
    }
    return out;
}

std::string to_utf8(char32_t c) {
    std::uint8_t buf[U8_MAX_LENGTH];
    std::int32_t n = 0;
    UBool error = false;
    U8_APPEND(buf, n, U8_MAX_LENGTH, static_cast<UChar32>(c), error);
    if (error) return "\xEF\xBF\xBD";
    return std::string(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(n));
}

std::string to_utf8(std::u32string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char32_t c : text) out += to_utf8(c);
    return out;
}

std::vector<std::string> normalize_words(std::string_view text, MetricMode mode) {
    std::vector<std::string> tokens;
    std::u32string current;
    auto flush = [&] {
        if (!current.empty()) tokens.push_back(to_utf8(current));
        current.clear();
    };
    for (char32_t c : to_utf32(text)) {
        if (u_isUWhiteSpace(static_cast<UChar32>(c))) {
            flush();
            continue;
        }
        if (mode == MetricMode::modified) {
            if (u_ispunct(static_cast<UChar32>(c))) continue;
            c = static_cast<char32_t>(u_tolower(static_cast<UChar32>(c)));
        }
        current.push_back(c);
    }
    flush();
    return tokens;
}

std::u32string join_tokens(const std::vector<std::string>& tokens, CharOptions options) {
    std::u32string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0 && options.count_spaces) out.push_back(U' ');
        out += to_utf32(tokens[i]);
    }
    return out;
}

std::u32string normalize_chars(std::string_view text, MetricMode mode, CharOptions options) {
    return join_tokens(normalize_words(text, mode), options);
}

}  // namespace pearl::metrics
