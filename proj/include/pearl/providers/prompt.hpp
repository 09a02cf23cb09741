#pragma once

#include "pearl/providers/provider.hpp"

#include <optional>
#include <string>

namespace pearl::providers {

inline constexpr std::string_view kRoughOpen = "<Rough Transcription>";
inline constexpr std::string_view kRoughClose = "</Rough Transcription>";

// Builds the request for one page. The rough transcription, when the template
// asks for one, is wrapped in <Rough Transcription> tags; the image goes where
// {image} sits. Throws ProviderError(invalid_request) when the rough text is
// missing or unexpected.
ProviderRequest render_prompt(const PromptTemplate& prompt, const ImageAsset& image,
                              const std::optional<TranscriptText>& rough = std::nullopt);

struct ExtractedAnswer {
    TranscriptText text;
    bool marker_missing = false;
};

// Text after the first case-insensitive occurrence of `marker`, trimmed. With
// no marker the whole trimmed reply is returned and flagged.
ExtractedAnswer extract_answer(const CompletionResult& result, std::string_view marker);

}  // namespace pearl::providers
