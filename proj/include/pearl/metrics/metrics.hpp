#pragma once

#include "pearl/metrics/align.hpp"
#include "pearl/metrics/lexicon.hpp"
#include "pearl/metrics/normalize.hpp"

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pearl::metrics {

class MetricError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// `reference` is N (words) or T (characters) depending on the report level.
struct ErrorCounts {
    std::size_t substitutions = 0;
    std::size_t deletions = 0;
    std::size_t insertions = 0;
    std::size_t correct = 0;
    std::size_t reference = 0;

    std::size_t errors() const { return substitutions + deletions + insertions; }
    double rate() const;

    ErrorCounts& operator+=(const ErrorCounts& o) {
        substitutions += o.substitutions;
        deletions += o.deletions;
        insertions += o.insertions;
        correct += o.correct;
        reference += o.reference;
        return *this;
    }
    bool operator==(const ErrorCounts&) const = default;
};

struct ErrorRecord {
    std::string hyp_token;  // empty for deletions
    std::string ref_token;  // empty for insertions
    EditOp op = EditOp::substitution;
    std::size_t count = 0;
    bool operator==(const ErrorRecord&) const = default;
};

struct MetricReport {
    MetricMode mode = MetricMode::strict;
    MetricLevel level = MetricLevel::word;
    ErrorCounts counts;
    double rate = 0.0;
    std::vector<ErrorRecord> error_records;  // merged by (hyp, ref, op)
    std::size_t forgiven = 0;                // modified-mode spelling pairs counted correct
};

struct MetricOptions {
    const Lexicon* lexicon = nullptr;  // nullptr: Lexicon::shared_default()
    CharOptions chars;
};

// (S + D + I) / N over normalized word tokens. In modified mode substitutions
// that pass forgive_spelling count as correct.
MetricReport word_error_rate(std::string_view ref_text, std::string_view hyp_text, MetricMode mode,
                             const MetricOptions& options = {});

// (S + D + I) / T over the normalized character stream. In modified mode,
// forgiven hypothesis words are replaced by their reference words before the
// character alignment.
MetricReport char_error_rate(std::string_view ref_text, std::string_view hyp_text, MetricMode mode,
                             const MetricOptions& options = {});

MetricReport error_rate(std::string_view ref_text, std::string_view hyp_text, MetricMode mode, MetricLevel level,
                        const MetricOptions& options = {});

struct CountValidation {
    bool ok = true;
    std::string detail;
};

// Reference-side identity: correct + S + D == N, and N == |ref|.
CountValidation validate_counts(const MetricReport& report, std::size_t reference_length);
CountValidation validate_counts(const MetricReport& report, std::span<const std::string> ref_tokens);

// Error list as CSV: header `error_word,ground_truth_word,operation,count`,
// identical triples merged, sorted by count descending then alphabetically.
std::string error_csv(std::span<const MetricReport> reports);
void export_error_csv(std::span<const MetricReport> reports, const std::filesystem::path& path);

struct RunAggregate {
    std::size_t n = 0;
    double mean = 0.0;
    double stddev = 0.0;  // sample (n - 1); 0 when n == 1
    double high = 0.0;
    double low = 0.0;
};

RunAggregate aggregate(std::span<const double> values);

}  // namespace pearl::metrics
