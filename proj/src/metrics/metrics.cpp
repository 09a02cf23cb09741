#include "pearl/metrics/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <tuple>

namespace pearl::metrics {

std::string_view to_string(EditOp op) {
    switch (op) {
        case EditOp::match: return "match";
        case EditOp::substitution: return "substitution";
        case EditOp::deletion: return "deletion";
        case EditOp::insertion: return "insertion";
    }
    return "match";
}

double ErrorCounts::rate() const {
    if (reference == 0) throw MetricError("reference is empty after normalization");
    return static_cast<double>(errors()) / static_cast<double>(reference);
}

namespace {

using RecordKey = std::tuple<std::string, std::string, EditOp>;

const Lexicon& lexicon_of(const MetricOptions& options) {
    return options.lexicon ? *options.lexicon : Lexicon::shared_default();
}

// Counts and records from an alignment. `token` renders element k of a side.
template <typename Seq, typename Render>
MetricReport tally(const Seq& ref, const Seq& hyp, const Alignment& alignment, Render token) {
    MetricReport report;
    std::map<RecordKey, std::size_t> records;
    for (const auto& step : alignment.steps) {
        switch (step.op) {
            case EditOp::match: ++report.counts.correct; break;
            case EditOp::substitution:
                ++report.counts.substitutions;
                ++records[{token(hyp[step.hyp]), token(ref[step.ref]), step.op}];
                break;
            case EditOp::deletion:
                ++report.counts.deletions;
                ++records[{std::string(), token(ref[step.ref]), step.op}];
                break;
            case EditOp::insertion:
                ++report.counts.insertions;
                ++records[{token(hyp[step.hyp]), std::string(), step.op}];
                break;
        }
    }
    report.counts.reference = ref.size();
    for (auto& [key, count] : records) {
        report.error_records.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), count});
    }
    return report;
}

// Word alignment with modified-mode forgiveness applied; forgiven steps become
// matches so counts and records stay consistent.
Alignment forgiving_alignment(const std::vector<std::string>& ref, const std::vector<std::string>& hyp,
                              MetricMode mode, const Lexicon& lexicon, std::size_t& forgiven) {
    Alignment alignment = align_sequences(ref, hyp);
    forgiven = 0;
    if (mode != MetricMode::modified) return alignment;
    for (auto& step : alignment.steps) {
        if (step.op == EditOp::substitution && forgive_spelling(ref[step.ref], hyp[step.hyp], lexicon)) {
            step.op = EditOp::match;
            ++forgiven;
        }
    }
    return alignment;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

MetricReport word_error_rate(std::string_view ref_text, std::string_view hyp_text, MetricMode mode,
                             const MetricOptions& options) {
    const auto ref = normalize_words(ref_text, mode);
    const auto hyp = normalize_words(hyp_text, mode);
    if (ref.empty()) throw MetricError("reference is empty after normalization");
    std::size_t forgiven = 0;
    const Alignment alignment = forgiving_alignment(ref, hyp, mode, lexicon_of(options), forgiven);
    MetricReport report = tally(ref, hyp, alignment, [](const std::string& t) { return t; });
    report.mode = mode;
    report.level = MetricLevel::word;
    report.rate = report.counts.rate();
    report.forgiven = forgiven;
    return report;
}

MetricReport char_error_rate(std::string_view ref_text, std::string_view hyp_text, MetricMode mode,
                             const MetricOptions& options) {
    const auto ref_words = normalize_words(ref_text, mode);
    auto hyp_words = normalize_words(hyp_text, mode);
    std::size_t forgiven = 0;
    if (mode == MetricMode::modified) {
        const Alignment words = forgiving_alignment(ref_words, hyp_words, mode, lexicon_of(options), forgiven);
        for (const auto& step : words.steps) {
            if (step.op == EditOp::match && hyp_words[step.hyp] != ref_words[step.ref]) {
                hyp_words[step.hyp] = ref_words[step.ref];
            }
        }
    }
    const std::u32string ref = join_tokens(ref_words, options.chars);
    const std::u32string hyp = join_tokens(hyp_words, options.chars);
    if (ref.empty()) throw MetricError("reference is empty after normalization");
    const Alignment alignment = align_sequences(ref, hyp);
    MetricReport report = tally(ref, hyp, alignment, [](char32_t c) { return to_utf8(c); });
    report.mode = mode;
    report.level = MetricLevel::character;
    report.rate = report.counts.rate();
    report.forgiven = forgiven;
    return report;
}

MetricReport error_rate(std::string_view ref_text, std::string_view hyp_text, MetricMode mode, MetricLevel level,
                        const MetricOptions& options) {
    return level == MetricLevel::word ? word_error_rate(ref_text, hyp_text, mode, options)
                                      : char_error_rate(ref_text, hyp_text, mode, options);
}

CountValidation validate_counts(const MetricReport& report, std::size_t reference_length) {
    const auto& c = report.counts;
    const std::size_t balance = c.correct + c.substitutions + c.deletions;
    CountValidation v;
    if (balance != c.reference) {
        v.ok = false;
        v.detail = fmt::format("correct({}) + S({}) + D({}) = {} but N = {}", c.correct, c.substitutions,
                               c.deletions, balance, c.reference);
    } else if (c.reference != reference_length) {
        v.ok = false;
        v.detail = fmt::format("report N = {} but reference has {} tokens", c.reference, reference_length);
    }
    std::size_t recorded = 0;
    for (const auto& r : report.error_records) recorded += r.count;
    if (v.ok && recorded != c.errors()) {
        v.ok = false;
        v.detail = fmt::format("error records sum to {} but S + D + I = {}", recorded, c.errors());
    }
    return v;
}

CountValidation validate_counts(const MetricReport& report, std::span<const std::string> ref_tokens) {
    return validate_counts(report, ref_tokens.size());
}

std::string error_csv(std::span<const MetricReport> reports) {
    std::map<RecordKey, std::size_t> merged;
    for (const auto& report : reports) {
        for (const auto& r : report.error_records) merged[{r.hyp_token, r.ref_token, r.op}] += r.count;
    }
    std::vector<std::pair<RecordKey, std::size_t>> rows(merged.begin(), merged.end());
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        const auto& [ah, ar, aop] = a.first;
        const auto& [bh, br, bop] = b.first;
        return std::tie(ah, ar, aop) < std::tie(bh, br, bop);
    });
    std::string out = "error_word,ground_truth_word,operation,count\n";
    for (const auto& [key, count] : rows) {
        const auto& [hyp, ref, op] = key;
        out += fmt::format("{},{},{},{}\n", csv_field(hyp), csv_field(ref), to_string(op), count);
    }
    return out;
}

void export_error_csv(std::span<const MetricReport> reports, const std::filesystem::path& path) {
    if (reports.empty()) throw MetricError("no reports to export");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw MetricError("cannot write " + path.string());
    out << error_csv(reports);
    if (!out) throw MetricError("write failed for " + path.string());
}

RunAggregate aggregate(std::span<const double> values) {
    if (values.empty()) throw MetricError("cannot aggregate an empty list");
    RunAggregate a;
    a.n = values.size();
    a.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(a.n);
    a.high = *std::max_element(values.begin(), values.end());
    a.low = *std::min_element(values.begin(), values.end());
    if (a.high == a.low) {
        a.mean = a.high;
    } else if (a.n > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - a.mean) * (v - a.mean);
        a.stddev = std::sqrt(ss / static_cast<double>(a.n - 1));
    }
    // Floating-point mean can drift a hair outside [low, high] for constant input.
    a.mean = std::clamp(a.mean, a.low, a.high);
    return a;
}

}  // namespace pearl::metrics
