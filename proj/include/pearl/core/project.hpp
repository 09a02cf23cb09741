#pragma once

#include "pearl/core/image.hpp"
#include "pearl/core/settings.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pearl {

class ProjectError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class TranscriptOrigin { llm, external_htr, human_edit };
enum class TranscriptKind { raw, corrected };
enum class PageStatus { empty, transcribed, corrected, error };

std::string_view to_string(TranscriptOrigin o);
std::string_view to_string(TranscriptKind k);
std::string_view to_string(PageStatus s);
TranscriptKind transcript_kind_from_string(std::string_view s);

struct TranscriptText {
    std::string text;  // verbatim; normalization happens only when scoring
    TranscriptOrigin origin = TranscriptOrigin::llm;
    bool operator==(const TranscriptText&) const = default;
};

struct TokenUsage {
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    bool estimated = false;

    TokenUsage& operator+=(const TokenUsage& o) {
        input_tokens += o.input_tokens;
        output_tokens += o.output_tokens;
        estimated = estimated || o.estimated;
        return *this;
    }
    bool operator==(const TokenUsage&) const = default;
};

// One entry per change to a page's transcripts.
struct JobProvenance {
    std::string action;  // transcribe | correct | import_external | human_edit
    TranscriptKind field = TranscriptKind::raw;
    std::string model_id;
    std::string timestamp;  // ISO-8601 UTC
    int attempts = 0;
    TokenUsage usage;
    bool operator==(const JobProvenance&) const = default;
};

struct PageRecord {
    std::size_t index = 0;
    ImageAsset image;
    std::optional<TranscriptText> raw_transcript;
    std::optional<TranscriptText> corrected_transcript;
    PageStatus status = PageStatus::empty;
    std::vector<JobProvenance> provenance;

    const std::optional<TranscriptText>& transcript(TranscriptKind k) const {
        return k == TranscriptKind::raw ? raw_transcript : corrected_transcript;
    }
    std::optional<TranscriptText>& transcript(TranscriptKind k) {
        return k == TranscriptKind::raw ? raw_transcript : corrected_transcript;
    }
    // Status implied by the populated fields (never `error`).
    PageStatus derived_status() const;
};

struct ProjectStore {
    std::string project_id;
    std::string created;
    std::string modified;
    std::vector<PageRecord> pages;
    Settings settings;

    static ProjectStore create();
    void touch();
};

struct ImportFailure {
    std::filesystem::path path;
    std::string message;
};

struct ImportReport {
    std::vector<std::size_t> added;  // page indices
    std::vector<ImportFailure> failures;
};

std::string utc_timestamp();

// Appends one page per decodable JPEG, ordered by filename. Undecodable files
// are reported and skipped.
ImportReport import_images(ProjectStore& project, std::span<const std::filesystem::path> paths);
// All *.jpg / *.jpeg files directly inside `dir`.
ImportReport import_image_directory(ProjectStore& project, const std::filesystem::path& dir);

// Renders each page at `dpi` and appends it. A malformed file leaves the
// project untouched and throws.
ImportReport import_pdf(ProjectStore& project, const std::filesystem::path& path, int dpi = 150);

// Sets external HTR text as each page's raw transcript. All-or-nothing.
void import_external_transcripts(ProjectStore& project,
                                 std::span<const std::pair<std::size_t, std::string>> pairs);

// Stores a transcript on a page and appends provenance. Rejects a corrected
// transcript on a page without a raw one.
void set_transcript(ProjectStore& project, std::size_t page, TranscriptKind which, TranscriptText text,
                    JobProvenance provenance);

// Operator edit through the review interface.
void edit_transcript(ProjectStore& project, std::size_t page, TranscriptKind which, std::string text);

void mark_page_failed(ProjectStore& project, std::size_t page);

inline constexpr std::string_view kDefaultPageSeparator = "\n\n----- page {n} -----\n\n";

// Joins transcripts in page order. `{n}` in the separator expands to the
// 1-based number of the page that follows it.
std::string export_text(const ProjectStore& project, TranscriptKind which,
                        std::string_view separator = kDefaultPageSeparator);

enum class ReplaceScope { page, all };

// Literal find/replace. Returns the number of replacements made.
std::size_t find_replace(ProjectStore& project, TranscriptKind which, std::string_view find,
                         std::string_view replace, ReplaceScope scope, std::size_t page = 0);

nlohmann::json manifest_json(const ProjectStore& project);
void save_project(const ProjectStore& project, const std::filesystem::path& dir);
ProjectStore load_project(const std::filesystem::path& dir);

}  // namespace pearl
