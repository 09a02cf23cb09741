#include "pearl/workflows/workflows.hpp"

#include "pearl/providers/mock.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <map>

namespace pearl::workflows {

using metrics::MetricLevel;
using metrics::MetricMode;

namespace {

std::shared_ptr<providers::Provider> provider_for(const ProviderProfile& profile, const WorkflowOptions& options) {
    const providers::SendOptions send{std::chrono::seconds(options.timeout_s)};
    return options.factory ? options.factory(profile, send) : providers::make_provider(profile, send);
}

batch::BatchSpec spec_for(batch::BatchTask task, const ProviderProfile& profile, const GenerationParams& params,
                          const WorkflowOptions& options) {
    batch::BatchSpec spec;
    spec.task = task;
    spec.profile = profile;
    spec.params = params;
    spec.concurrency_cap = options.concurrency_cap;
    spec.max_attempts = options.max_attempts;
    spec.timeout_s = options.timeout_s;
    spec.retry_pause = options.retry_pause;
    spec.retry_recitation = options.retry_recitation;
    return spec;
}

// The single writer: applies batch results to the project in page order.
void apply_results(ProjectStore& project, const batch::BatchResult& result, batch::BatchTask task,
                   const ProviderProfile& profile) {
    const TranscriptKind field = task == batch::BatchTask::transcribe ? TranscriptKind::raw : TranscriptKind::corrected;
    for (const auto& r : result.pages) {
        if (r.ok) {
            set_transcript(project, r.page, field, {r.text->text, TranscriptOrigin::llm},
                           {.action = std::string(batch::to_string(task)),
                            .model_id = profile.model_id,
                            .attempts = r.attempts,
                            .usage = r.usage});
        } else {
            mark_page_failed(project, r.page);
        }
    }
}

WorkflowOutcome run_task(ProjectStore& project, batch::BatchTask task, const ProviderProfile& profile,
                         const GenerationParams& params, const WorkflowOptions& options) {
    auto provider = provider_for(profile, options);
    WorkflowOutcome outcome;
    outcome.batch = batch::run_batch(project, spec_for(task, profile, params, options), *provider, options.sink);
    apply_results(project, outcome.batch, task, profile);
    for (const auto& r : outcome.batch.pages) {
        if (r.marker_missing) {
            outcome.warnings.push_back(fmt::format("page {}: reply lacked the answer marker", r.page + 1));
        }
    }
    return outcome;
}

std::optional<std::string> raw_author(const PageRecord& page) {
    for (auto it = page.provenance.rbegin(); it != page.provenance.rend(); ++it) {
        if (it->field == TranscriptKind::raw) return it->model_id;
    }
    return std::nullopt;
}

std::size_t count_units(std::string_view text, MetricMode mode, MetricLevel level, const metrics::CharOptions& chars) {
    return level == MetricLevel::word ? metrics::normalize_words(text, mode).size()
                                      : metrics::normalize_chars(text, mode, chars).size();
}

std::string percent(double v) { return fmt::format("{:.2f}", v * 100.0); }

}  // namespace

WorkflowOutcome transcribe_all(ProjectStore& project, const ProviderProfile& profile, const GenerationParams& params,
                               const WorkflowOptions& options) {
    return run_task(project, batch::BatchTask::transcribe, profile, params, options);
}

WorkflowOutcome correct_all(ProjectStore& project, const ProviderProfile& profile, const GenerationParams& params,
                            const WorkflowOptions& options) {
    std::vector<std::string> warnings;
    const bool homogeneous = std::any_of(project.pages.begin(), project.pages.end(), [&](const PageRecord& p) {
        return p.raw_transcript && raw_author(p) == profile.model_id;
    });
    if (homogeneous) {
        warnings.push_back(fmt::format(
            "correcting with {}, the model that produced the raw transcripts; self-correction is unlikely to help",
            profile.model_id));
        spdlog::warn("{}", warnings.back());
    }
    auto outcome = run_task(project, batch::BatchTask::correct, profile, params, options);
    outcome.warnings.insert(outcome.warnings.begin(), warnings.begin(), warnings.end());
    return outcome;
}

std::string_view to_string(Pipeline p) {
    switch (p) {
        case Pipeline::transcribe_only: return "transcribe_only";
        case Pipeline::transcribe_then_correct: return "transcribe_then_correct";
        case Pipeline::correct_external: return "correct_external";
    }
    return "transcribe_only";
}

Pipeline pipeline_from_string(std::string_view s) {
    if (s == "transcribe_only") return Pipeline::transcribe_only;
    if (s == "transcribe_then_correct") return Pipeline::transcribe_then_correct;
    if (s == "correct_external") return Pipeline::correct_external;
    throw WorkflowError("unknown pipeline: " + std::string(s));
}

void ExperimentSpec::validate() const {
    if (runs < 1) throw WorkflowError("runs must be >= 1");
    if (project.pages.empty()) throw WorkflowError("experiment project has no pages");
    if (ground_truth.size() != project.pages.size()) {
        throw WorkflowError(fmt::format("ground truth covers {} pages but the project has {}", ground_truth.size(),
                                        project.pages.size()));
    }
    if (pipeline != Pipeline::transcribe_only && !correct_profile) {
        throw WorkflowError("pipeline " + std::string(to_string(pipeline)) + " needs a correction profile");
    }
    if (pipeline == Pipeline::correct_external) {
        for (const auto& p : project.pages) {
            if (!p.raw_transcript) throw WorkflowError(fmt::format("page {} has no external transcript", p.index + 1));
        }
    }
    params.validate();
}

std::uint64_t run_seed(std::uint64_t master_seed, int run) {
    return providers::splitmix64(master_seed + static_cast<std::uint64_t>(run));
}

metrics::MetricReport pooled_report(std::span<const std::string> truth,
                                    std::span<const std::optional<std::string>> hypotheses, MetricMode mode,
                                    MetricLevel level, const metrics::MetricOptions& options) {
    if (truth.size() != hypotheses.size()) throw WorkflowError("truth and hypothesis counts differ");
    metrics::MetricReport pooled;
    pooled.mode = mode;
    pooled.level = level;
    std::map<std::tuple<std::string, std::string, metrics::EditOp>, std::size_t> records;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const std::string hyp = hypotheses[i].value_or(std::string());
        if (count_units(truth[i], mode, level, options.chars) == 0) {
            // Nothing to compare against: every hypothesis unit is an insertion.
            pooled.counts.insertions += count_units(hyp, mode, level, options.chars);
            continue;
        }
        const auto page = metrics::error_rate(truth[i], hyp, mode, level, options);
        pooled.counts += page.counts;
        pooled.forgiven += page.forgiven;
        for (const auto& r : page.error_records) records[{r.hyp_token, r.ref_token, r.op}] += r.count;
    }
    for (const auto& [key, count] : records) {
        pooled.error_records.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), count});
    }
    pooled.rate = pooled.counts.rate();
    return pooled;
}

Evaluation evaluate_project(const ProjectStore& project, std::span<const std::string> truth, TranscriptKind which,
                            MetricMode mode, MetricLevel level, const metrics::MetricOptions& options) {
    if (truth.size() != project.pages.size()) {
        throw WorkflowError(fmt::format("{} reference texts for {} pages", truth.size(), project.pages.size()));
    }
    Evaluation out;
    out.which = which;
    std::vector<std::optional<std::string>> hyps;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto& t = project.pages[i].transcript(which);
        hyps.push_back(t ? std::optional<std::string>(t->text) : std::nullopt);
        if (count_units(truth[i], mode, level, options.chars) == 0) {
            out.page_rates.push_back(std::nullopt);
        } else {
            out.page_rates.push_back(metrics::error_rate(truth[i], hyps.back().value_or(""), mode, level, options).rate);
        }
    }
    out.pooled = pooled_report(truth, hyps, mode, level, options);
    return out;
}

const ExperimentCell* ExperimentReport::cell(std::string_view stage, MetricMode mode, MetricLevel level) const {
    for (const auto& c : cells) {
        if (c.stage == stage && c.mode == mode && c.level == level) return &c;
    }
    return nullptr;
}

ExperimentReport run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    ExperimentReport report;
    report.pipeline = spec.pipeline;
    report.runs_requested = spec.runs;

    const bool corrects = spec.pipeline != Pipeline::transcribe_only;
    const std::string initial_model =
        spec.pipeline == Pipeline::correct_external ? "external_htr" : spec.transcribe_profile.model_id;
    const std::string correct_model = corrects ? spec.correct_profile->model_id : std::string();

    constexpr MetricMode kModes[] = {MetricMode::strict, MetricMode::modified};
    constexpr MetricLevel kLevels[] = {MetricLevel::character, MetricLevel::word};
    std::vector<std::string> stages = {"initial"};
    if (corrects) stages.push_back("corrected");
    for (const auto& stage : stages) {
        for (auto level : kLevels) {
            for (auto mode : kModes) {
                ExperimentCell c;
                c.stage = stage;
                c.transcribe_model = initial_model;
                c.correct_model = stage == "corrected" ? correct_model : std::string();
                c.mode = mode;
                c.level = level;
                report.cells.push_back(std::move(c));
            }
        }
    }

    auto score = [&](const std::string& stage, const std::vector<std::optional<std::string>>& hyps) {
        for (auto& c : report.cells) {
            if (c.stage != stage) continue;
            c.per_run.push_back(pooled_report(spec.ground_truth, hyps, c.mode, c.level, spec.metric_options).rate);
        }
    };
    auto texts = [](const ProjectStore& p, TranscriptKind k) {
        std::vector<std::optional<std::string>> out;
        for (const auto& page : p.pages) {
            const auto& t = page.transcript(k);
            out.push_back(t ? std::optional<std::string>(t->text) : std::nullopt);
        }
        return out;
    };
    auto add_warnings = [&](const std::vector<std::string>& ws) {
        for (const auto& w : ws) {
            if (std::find(report.warnings.begin(), report.warnings.end(), w) == report.warnings.end()) {
                report.warnings.push_back(w);
            }
        }
    };
    auto check_batch = [](const batch::BatchResult& r, std::string_view what) {
        if (r.stats.pages_ok == 0) {
            const auto& first = r.pages.front();
            throw WorkflowError(fmt::format("{} failed on every page (first error: {})", what, first.error));
        }
    };

    for (int run = 0; run < spec.runs; ++run) {
        RunRecord record;
        record.run = run + 1;
        record.seed = run_seed(spec.master_seed, run);
        try {
            // Clean clone: nothing from earlier runs leaks in.
            ProjectStore project = spec.project;
            for (auto& page : project.pages) {
                if (spec.pipeline != Pipeline::correct_external) page.raw_transcript.reset();
                page.corrected_transcript.reset();
                page.status = page.derived_status();
            }
            ProviderProfile transcriber = spec.transcribe_profile;
            transcriber.mock.seed ^= record.seed;

            if (spec.pipeline != Pipeline::correct_external) {
                const auto outcome = transcribe_all(project, transcriber, spec.params, spec.options);
                check_batch(outcome.batch, "transcription");
                record.transcribe = outcome.batch.stats;
                add_warnings(outcome.warnings);
            }
            const auto initial = texts(project, TranscriptKind::raw);

            std::vector<std::optional<std::string>> corrected;
            if (corrects) {
                ProviderProfile corrector = *spec.correct_profile;
                corrector.mock.seed ^= providers::splitmix64(record.seed);
                const auto outcome = correct_all(project, corrector, spec.params, spec.options);
                check_batch(outcome.batch, "correction");
                record.correct = outcome.batch.stats;
                add_warnings(outcome.warnings);
                corrected = texts(project, TranscriptKind::corrected);
            }
            score("initial", initial);
            if (corrects) score("corrected", corrected);
        } catch (const std::exception& e) {
            report.error = fmt::format("run {} aborted: {}", run + 1, e.what());
            spdlog::error("{}", report.error);
            break;
        }
        report.runs.push_back(record);
        ++report.runs_completed;
    }

    for (auto& c : report.cells) {
        if (!c.per_run.empty()) c.aggregate = metrics::aggregate(c.per_run);
    }
    if (report.runs_completed > 0) {
        for (auto& c : report.cells) {
            if (c.stage != "corrected") continue;
            const auto* initial = report.cell("initial", c.mode, c.level);
            if (initial && initial->aggregate.mean > 0.0) {
                c.improvement = (initial->aggregate.mean - c.aggregate.mean) / initial->aggregate.mean;
            }
        }
    }
    return report;
}

nlohmann::json report_json(const ExperimentReport& report) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : report.cells) {
        nlohmann::json j = {{"stage", c.stage},
                            {"transcribe_model", c.transcribe_model},
                            {"correct_model", c.correct_model},
                            {"mode", std::string(metrics::to_string(c.mode))},
                            {"level", std::string(metrics::to_string(c.level))},
                            {"per_run", c.per_run},
                            {"n", c.aggregate.n},
                            {"mean", c.aggregate.mean},
                            {"stddev", c.aggregate.stddev},
                            {"high", c.aggregate.high},
                            {"low", c.aggregate.low}};
        j["improvement"] = c.improvement ? nlohmann::json(*c.improvement) : nlohmann::json(nullptr);
        cells.push_back(std::move(j));
    }
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : report.runs) {
        nlohmann::json j = {{"run", r.run}, {"seed", r.seed}};
        if (r.transcribe) j["transcribe"] = *r.transcribe;
        if (r.correct) j["correct"] = *r.correct;
        runs.push_back(std::move(j));
    }
    return {{"version", 1},
            {"pipeline", std::string(to_string(report.pipeline))},
            {"runs_requested", report.runs_requested},
            {"runs_completed", report.runs_completed},
            {"ok", report.ok()},
            {"error", report.error},
            {"warnings", report.warnings},
            {"cells", cells},
            {"runs", runs}};
}

std::string report_table(const ExperimentReport& report) {
    std::string out = fmt::format("Pipeline: {}   runs: {}/{}\n", to_string(report.pipeline), report.runs_completed,
                                  report.runs_requested);
    out += fmt::format("{:<10} {:<22} {:<22} {:<9} {:<6} {:>11} {:>9} {:>9} {:>9} {:>15}\n", "Stage", "Transcriber",
                       "Corrector", "Mode", "Level", "Average (%)", "Std. Dev.", "High (%)", "Low (%)",
                       "Improvement (%)");
    for (const auto& c : report.cells) {
        const auto level = c.level == MetricLevel::word ? "WER" : "CER";
        const std::string improvement = c.improvement ? percent(*c.improvement) : "-";
        if (c.per_run.empty()) {
            out += fmt::format("{:<10} {:<22} {:<22} {:<9} {:<6} {:>11}\n", c.stage, c.transcribe_model,
                               c.correct_model.empty() ? "-" : c.correct_model, metrics::to_string(c.mode), level,
                               "n/a");
            continue;
        }
        out += fmt::format("{:<10} {:<22} {:<22} {:<9} {:<6} {:>11} {:>9} {:>9} {:>9} {:>15}\n", c.stage,
                           c.transcribe_model, c.correct_model.empty() ? "-" : c.correct_model,
                           metrics::to_string(c.mode), level, percent(c.aggregate.mean), percent(c.aggregate.stddev),
                           percent(c.aggregate.high), percent(c.aggregate.low), improvement);
    }
    for (const auto& w : report.warnings) out += "warning: " + w + "\n";
    if (!report.ok()) out += "error: " + report.error + "\n";
    return out;
}

void write_report(const ExperimentReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream json_out(dir / "experiment_report.json", std::ios::trunc);
    std::ofstream text_out(dir / "experiment_report.txt", std::ios::trunc);
    if (!json_out || !text_out) throw WorkflowError("cannot write report files in " + dir.string());
    json_out << report_json(report).dump(2) << '\n';
    text_out << report_table(report);
}

}  // namespace pearl::workflows
