#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace pearl::metrics {

enum class MetricMode { strict, modified };
enum class MetricLevel { word, character };

std::string_view to_string(MetricMode m);
std::string_view to_string(MetricLevel l);
MetricMode mode_from_string(std::string_view s);
MetricLevel level_from_string(std::string_view s);

struct CharOptions {
    // Inter-word separators count as characters at the char level.
    bool count_spaces = true;
};

// Word tokens (UTF-8). Both modes collapse every whitespace run, line breaks
// included, and trim the ends. Modified mode also lowercases and deletes
// Unicode punctuation (general category P*); tokens left empty are dropped.
std::vector<std::string> normalize_words(std::string_view text, MetricMode mode);

// Character stream: the word tokens joined by single spaces, as code points.
std::u32string normalize_chars(std::string_view text, MetricMode mode, CharOptions options = {});
std::u32string join_tokens(const std::vector<std::string>& tokens, CharOptions options = {});

std::u32string to_utf32(std::string_view utf8);
std::string to_utf8(std::u32string_view text);
std::string to_utf8(char32_t c);

}  // namespace pearl::metrics
