#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_set>

namespace pearl::metrics {

// A modern-English word list: one lowercase word per line.
class Lexicon {
public:
    Lexicon() = default;
    explicit Lexicon(std::unordered_set<std::string> words) : words_(std::move(words)) {}

    static Lexicon load(const std::filesystem::path& path);
    // PEARL_LEXICON if set, otherwise the list shipped with the build.
    static const Lexicon& shared_default();
    static std::filesystem::path default_path();

    bool contains(std::string_view canonical_word) const { return words_.count(std::string(canonical_word)) > 0; }
    std::size_t size() const { return words_.size(); }

private:
    std::unordered_set<std::string> words_;
};

// Letters only, lowercased ("Employ'd" -> "employd").
std::u32string canonical_letters(std::string_view token);
bool has_digit(std::string_view token);

// Archaic-to-modern spelling forgiveness for a substituted word pair, used by
// modified mode. True iff neither token has a digit, the reference is not a
// dictionary word, the hypothesis is, their canonical forms are within edit
// distance 2, and they share a first letter.
bool forgive_spelling(std::string_view ref_token, std::string_view hyp_token, const Lexicon& lexicon);

}  // namespace pearl::metrics
