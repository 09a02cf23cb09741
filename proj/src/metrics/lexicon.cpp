#include "pearl/metrics/lexicon.hpp"

#include "pearl/metrics/align.hpp"
#include "pearl/metrics/normalize.hpp"

#include <unicode/uchar.h>

#include <cstdlib>
#include <fstream>
#include <stdexcept>

#ifndef PEARL_DEFAULT_LEXICON
#define PEARL_DEFAULT_LEXICON "data/lexicon_en.txt"
#endif

namespace pearl::metrics {

Lexicon Lexicon::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open lexicon " + path.string());
    std::unordered_set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        const auto canon = to_utf8(canonical_letters(line));
        if (!canon.empty()) words.insert(canon);
    }
    return Lexicon(std::move(words));
}

std::filesystem::path Lexicon::default_path() {
    if (const char* env = std::getenv("PEARL_LEXICON"); env && *env) return env;
    return PEARL_DEFAULT_LEXICON;
}

const Lexicon& Lexicon::shared_default() {
    static const Lexicon lexicon = load(default_path());
    return lexicon;
}

std::u32string canonical_letters(std::string_view token) {
    std::u32string out;
    for (char32_t c : to_utf32(token)) {
        if (u_isalpha(static_cast<UChar32>(c))) out.push_back(static_cast<char32_t>(u_tolower(static_cast<UChar32>(c))));
    }
    return out;
}

bool has_digit(std::string_view token) {
    for (char32_t c : to_utf32(token)) {
        if (u_isdigit(static_cast<UChar32>(c))) return true;
    }
    return false;
}

bool forgive_spelling(std::string_view ref_token, std::string_view hyp_token, const Lexicon& lexicon) {
    if (has_digit(ref_token) || has_digit(hyp_token)) return false;
    const std::u32string ref = canonical_letters(ref_token);
    const std::u32string hyp = canonical_letters(hyp_token);
    if (ref.empty() || hyp.empty()) return false;
    if (ref.front() != hyp.front()) return false;
    if (lexicon.contains(to_utf8(ref))) return false;
    if (!lexicon.contains(to_utf8(hyp))) return false;
    return align_sequences(ref, hyp).cost() <= 2;
}

}  // namespace pearl::metrics
