#pragma once

#include "pearl/batch/batch.hpp"
#include "pearl/metrics/metrics.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace pearl::workflows {

class WorkflowError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using ProviderFactory =
    std::function<std::shared_ptr<providers::Provider>(const ProviderProfile&, const providers::SendOptions&)>;

struct WorkflowOptions {
    int concurrency_cap = 50;
    int max_attempts = 3;
    int timeout_s = 120;
    std::chrono::milliseconds retry_pause{2000};
    bool retry_recitation = false;
    batch::ProgressSink sink;
    ProviderFactory factory;  // empty: providers::make_provider
};

struct WorkflowOutcome {
    batch::BatchResult batch;
    std::vector<std::string> warnings;
};

// Fills raw transcripts of successful pages. Failed pages keep any earlier
// text and are marked as errored.
WorkflowOutcome transcribe_all(ProjectStore& project, const ProviderProfile& profile, const GenerationParams& params,
                               const WorkflowOptions& options = {});

// Fills corrected transcripts from each page's raw one. Warns when the
// corrector is the model that produced the raw text.
WorkflowOutcome correct_all(ProjectStore& project, const ProviderProfile& profile, const GenerationParams& params,
                            const WorkflowOptions& options = {});

enum class Pipeline { transcribe_only, transcribe_then_correct, correct_external };
std::string_view to_string(Pipeline p);
Pipeline pipeline_from_string(std::string_view s);

struct ExperimentSpec {
    ProjectStore project;                  // pages, plus imported raws for correct_external
    std::vector<std::string> ground_truth;  // one per page
    Pipeline pipeline = Pipeline::transcribe_only;
    ProviderProfile transcribe_profile;
    std::optional<ProviderProfile> correct_profile;
    GenerationParams params;
    int runs = 10;
    std::uint64_t master_seed = 0;
    WorkflowOptions options;
    metrics::MetricOptions metric_options;

    void validate() const;
};

// Fixed derivation so a master seed reproduces every run.
std::uint64_t run_seed(std::uint64_t master_seed, int run);

// Pooled rate over pages: total errors over total reference tokens. Pages
// without a hypothesis score as empty text.
metrics::MetricReport pooled_report(std::span<const std::string> truth,
                                    std::span<const std::optional<std::string>> hypotheses, metrics::MetricMode mode,
                                    metrics::MetricLevel level, const metrics::MetricOptions& options = {});

struct Evaluation {
    TranscriptKind which = TranscriptKind::raw;
    metrics::MetricReport pooled;
    std::vector<std::optional<double>> page_rates;  // empty when the page's reference is empty
};

// Scores one transcript field of every page against `truth` (one per page).
Evaluation evaluate_project(const ProjectStore& project, std::span<const std::string> truth, TranscriptKind which,
                            metrics::MetricMode mode, metrics::MetricLevel level,
                            const metrics::MetricOptions& options = {});

struct ExperimentCell {
    std::string stage;  // initial | corrected
    std::string transcribe_model;
    std::string correct_model;
    metrics::MetricMode mode = metrics::MetricMode::strict;
    metrics::MetricLevel level = metrics::MetricLevel::word;
    std::vector<double> per_run;
    metrics::RunAggregate aggregate;
    std::optional<double> improvement;  // corrected cells only
};

struct RunRecord {
    int run = 0;
    std::uint64_t seed = 0;
    std::optional<batch::BatchStats> transcribe;
    std::optional<batch::BatchStats> correct;
};

struct ExperimentReport {
    Pipeline pipeline = Pipeline::transcribe_only;
    int runs_requested = 0;
    int runs_completed = 0;
    std::vector<ExperimentCell> cells;
    std::vector<RunRecord> runs;
    std::vector<std::string> warnings;
    std::string error;  // non-empty when a run aborted

    bool ok() const { return error.empty(); }
    const ExperimentCell* cell(std::string_view stage, metrics::MetricMode mode, metrics::MetricLevel level) const;
};

ExperimentReport run_experiment(const ExperimentSpec& spec);

nlohmann::json report_json(const ExperimentReport& report);
// Average / Std. Dev. / High / Low / Improvement in percent.
std::string report_table(const ExperimentReport& report);
// Writes experiment_report.json and experiment_report.txt into `dir`.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);

}  // namespace pearl::workflows
