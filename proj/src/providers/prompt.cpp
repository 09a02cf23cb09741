#include "pearl/providers/prompt.hpp"

#include <algorithm>
#include <cctype>

namespace pearl::providers {
namespace {

constexpr std::string_view kWhitespace = " \t\r\n\f\v";

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(kWhitespace);
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(kWhitespace);
    return s.substr(first, last - first + 1);
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
    return s;
}

char fold(char c) {
    return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

// ASCII case-insensitive search; non-ASCII bytes compare exactly.
std::size_t find_folded(std::string_view haystack, std::string_view needle) {
    auto it = std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end(),
                          [](char a, char b) { return fold(a) == fold(b); });
    return it == haystack.end() ? std::string_view::npos : static_cast<std::size_t>(it - haystack.begin());
}

}  // namespace

ProviderRequest render_prompt(const PromptTemplate& prompt, const ImageAsset& image,
                              const std::optional<TranscriptText>& rough) {
    const bool needs_rough = prompt.requires_rough();
    if (needs_rough && !rough) throw ProviderError(ErrorClass::invalid_request, "missing rough transcription");
    if (!needs_rough && rough) {
        throw ProviderError(ErrorClass::invalid_request, "template has no {rough_transcription} placeholder");
    }
    const auto image_pos = prompt.user.find(kImagePlaceholder);
    if (image_pos == std::string::npos || prompt.user.find(kImagePlaceholder, image_pos + 1) != std::string::npos) {
        throw ProviderError(ErrorClass::invalid_request, "user message must contain {image} exactly once");
    }
    if (!image.bytes || image.bytes->empty()) throw ProviderError(ErrorClass::invalid_request, "page has no image");

    ProviderRequest request;
    request.system = prompt.system;
    request.image = image;
    request.answer_marker = prompt.answer_marker;

    std::string block;
    if (rough) {
        request.rough = rough->text;
        block = std::string(kRoughOpen) + rough->text + std::string(kRoughClose);
    }
    auto render = [&](std::string_view part) {
        return std::string(trim(replace_all(std::string(part), kRoughPlaceholder, block)));
    };
    const std::string before = render(std::string_view(prompt.user).substr(0, image_pos));
    const std::string after = render(std::string_view(prompt.user).substr(image_pos + kImagePlaceholder.size()));
    if (!before.empty()) request.user_parts.push_back({UserPart::Kind::text, before});
    request.user_parts.push_back({UserPart::Kind::image, {}});
    if (!after.empty()) request.user_parts.push_back({UserPart::Kind::text, after});
    return request;
}

ExtractedAnswer extract_answer(const CompletionResult& result, std::string_view marker) {
    if (trim(result.text).empty()) throw ProviderError(ErrorClass::empty_completion, "empty completion", result.text);
    ExtractedAnswer answer;
    const auto pos = marker.empty() ? std::string_view::npos : find_folded(result.text, marker);
    if (pos == std::string_view::npos) {
        answer.text.text = std::string(trim(result.text));
        answer.marker_missing = true;
    } else {
        answer.text.text = std::string(trim(std::string_view(result.text).substr(pos + marker.size())));
    }
    answer.text.origin = TranscriptOrigin::llm;
    return answer;
}

}  // namespace pearl::providers
