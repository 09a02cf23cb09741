#include "pearl/frontdoor/cli.hpp"

#include "pearl/frontdoor/server.hpp"
#include "pearl/providers/mock.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <iostream>

namespace pearl::frontdoor {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Operational failure with a message for stderr; maps to exit code 1.
class CliError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() ? p : base / p; }

ProjectStore open_project(const fs::path& dir) {
    if (fs::exists(dir / "project.json")) return load_project(dir);
    return ProjectStore::create();
}

ProjectStore open_existing(const fs::path& dir) {
    if (!fs::exists(dir / "project.json")) throw CliError("no project at " + dir.string() + " (run import first)");
    return load_project(dir);
}

// Lets a settings file override the project's prompts, params and profiles.
void apply_settings_file(ProjectStore& project, const std::string& path) {
    if (!path.empty()) project.settings = load_settings_file(path);
}

void require_credential(const ProviderProfile& profile) {
    try {
        providers::resolve_credential(profile);
    } catch (const providers::ProviderError& e) {
        throw CliError(e.what());
    }
}

// "\n" and "\t" escapes so separators can be given on a command line.
std::string unescape(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
            const char c = s[++i];
            out += c == 'n' ? '\n' : c == 't' ? '\t' : c;
        } else {
            out += s[i];
        }
    }
    return out;
}

void print_stats(std::ostream& out, const batch::BatchStats& s) {
    out << fmt::format("pages {} ok {} failed {}\n", s.pages, s.pages_ok, s.pages_failed);
    out << fmt::format("wall time {:.2f} s, {:.2f} s/page\n", s.wall_time_s, s.per_page_s);
    out << fmt::format("tokens in {} out {}{}\n", s.input_tokens, s.output_tokens,
                       s.tokens_estimated ? " (estimated)" : "");
    out << fmt::format("cost {}\n", batch::format_usd(s.cost_usd));
}

batch::ProgressSink progress_printer(std::ostream& err, std::size_t total) {
    auto done = std::make_shared<std::size_t>(0);
    return [&err, total, done](const batch::ProgressEvent& e) {
        if (e.phase == batch::ProgressPhase::retrying) {
            err << fmt::format("page {}: retry {} ({})\n", e.page + 1, e.attempt, e.detail);
        } else if (e.phase == batch::ProgressPhase::done || e.phase == batch::ProgressPhase::failed) {
            ++*done;
            err << fmt::format("[{}/{}] page {} {}{}\n", *done, total, e.page + 1, batch::to_string(e.phase),
                               e.detail.empty() ? "" : ": " + e.detail);
        }
    };
}

struct BatchFlags {
    std::string profile;
    int concurrency = 50;
    int max_attempts = 3;
    int timeout_s = 120;
    int retry_pause_ms = 2000;
    bool retry_recitation = false;
    std::string progress_log;
    std::optional<double> temperature;
    std::optional<double> top_p;
    std::optional<int> max_tokens;

    void attach(CLI::App* cmd) {
        cmd->add_option("--profile", profile, "Provider profile name from the settings");
        cmd->add_option("--concurrency", concurrency, "Maximum requests in flight")->check(CLI::PositiveNumber);
        cmd->add_option("--max-attempts", max_attempts, "Attempts per page, first included")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--timeout", timeout_s, "Per-request timeout in seconds")->check(CLI::PositiveNumber);
        cmd->add_option("--retry-pause-ms", retry_pause_ms, "Pause before each retry")->check(CLI::NonNegativeNumber);
        cmd->add_flag("--retry-recitation", retry_recitation, "Retry replies blocked as recitation");
        cmd->add_option("--progress-log", progress_log, "Append progress events as JSON lines");
        cmd->add_option("--temperature", temperature);
        cmd->add_option("--top-p", top_p);
        cmd->add_option("--max-tokens", max_tokens);
    }

    GenerationParams params(const Settings& s) const {
        GenerationParams p = s.params;
        if (temperature) p.temperature = *temperature;
        if (top_p) p.top_p = *top_p;
        if (max_tokens) p.max_output_tokens = *max_tokens;
        p.validate();
        return p;
    }
};

// Runs transcribe or correct over a saved project and persists the result.
int run_batch_command(batch::BatchTask task, const BatchFlags& flags, ProjectStore& project, const fs::path& dir,
                      std::ostream& out, std::ostream& err) {
    const Settings& s = project.settings;
    std::string name = flags.profile;
    if (name.empty()) {
        name = task == batch::BatchTask::correct && !s.correct_profile.empty() ? s.correct_profile : s.active_profile;
    }
    const ProviderProfile profile = s.profile(name);
    require_credential(profile);
    const GenerationParams params = flags.params(s);

    workflows::WorkflowOptions options;
    options.concurrency_cap = flags.concurrency;
    options.max_attempts = flags.max_attempts;
    options.timeout_s = flags.timeout_s;
    options.retry_pause = std::chrono::milliseconds(flags.retry_pause_ms);
    options.retry_recitation = flags.retry_recitation;
    auto printer = progress_printer(err, project.pages.size());
    std::unique_ptr<batch::JsonlProgressLog> log;
    if (!flags.progress_log.empty()) log = std::make_unique<batch::JsonlProgressLog>(flags.progress_log);
    options.sink = [&](const batch::ProgressEvent& e) {
        printer(e);
        if (log) (*log)(e);
    };

    const auto outcome = task == batch::BatchTask::transcribe
                             ? workflows::transcribe_all(project, profile, params, options)
                             : workflows::correct_all(project, profile, params, options);
    save_project(project, dir);
    for (const auto& w : outcome.warnings) err << "warning: " << w << '\n';
    for (const auto& r : outcome.batch.pages) {
        if (!r.ok) err << fmt::format("page {} failed after {} attempt(s): {}\n", r.page + 1, r.attempts, r.error);
    }
    print_stats(out, outcome.batch.stats);
    return outcome.batch.stats.pages_failed == 0 ? kExitOk : kExitOperational;
}

std::vector<std::pair<std::size_t, std::string>> numbered(const std::vector<std::string>& texts) {
    std::vector<std::pair<std::size_t, std::string>> out;
    for (std::size_t i = 0; i < texts.size(); ++i) out.emplace_back(i, texts[i]);
    return out;
}

ProviderProfile profile_from_json(const json& j, const Settings& settings) {
    if (j.is_string()) return settings.profile(j.get<std::string>());
    return j.get<ProviderProfile>();
}

}  // namespace

LoadedExperiment experiment_from_json(const json& j, const fs::path& base) {
    LoadedExperiment out;
    auto& spec = out.spec;
    Settings settings;
    if (j.contains("settings")) settings = load_settings_file(resolve(base, j.at("settings").get<std::string>()));
    if (j.contains("profiles")) {
        for (const auto& pj : j.at("profiles")) {
            auto p = pj.get<ProviderProfile>();
            auto it = std::find_if(settings.profiles.begin(), settings.profiles.end(),
                                   [&](const ProviderProfile& q) { return q.name == p.name; });
            if (it != settings.profiles.end()) {
                *it = std::move(p);
            } else {
                settings.profiles.push_back(std::move(p));
            }
        }
    }

    if (j.contains("project")) {
        spec.project = load_project(resolve(base, j.at("project").get<std::string>()));
    } else if (j.contains("images")) {
        spec.project = ProjectStore::create();
        const auto report = import_image_directory(spec.project, resolve(base, j.at("images").get<std::string>()));
        if (!report.failures.empty()) {
            throw workflows::WorkflowError("cannot import " + report.failures.front().path.string() + ": " +
                                           report.failures.front().message);
        }
    } else if (j.contains("pdf")) {
        spec.project = ProjectStore::create();
        import_pdf(spec.project, resolve(base, j.at("pdf").get<std::string>()), j.value("dpi", 150));
    } else {
        throw workflows::WorkflowError("experiment spec needs project, images or pdf");
    }
    spec.project.settings = settings;

    const fs::path truth_dir = resolve(base, j.at("ground_truth").get<std::string>());
    spec.ground_truth = providers::load_ground_truth(truth_dir);
    spec.pipeline = workflows::pipeline_from_string(j.value("pipeline", std::string("transcribe_only")));

    auto fill_truth = [&](ProviderProfile& p) {
        if (p.dialect != RequestDialect::mock) return;
        p.mock.truth_dir = p.mock.truth_dir.empty() ? truth_dir : resolve(base, p.mock.truth_dir);
    };
    spec.transcribe_profile = profile_from_json(j.value("transcribe_profile", json(settings.active_profile)), settings);
    fill_truth(spec.transcribe_profile);
    if (j.contains("correct_profile")) {
        spec.correct_profile = profile_from_json(j.at("correct_profile"), settings);
        fill_truth(*spec.correct_profile);
    }
    if (j.contains("external_texts")) {
        const auto texts = providers::load_ground_truth(resolve(base, j.at("external_texts").get<std::string>()));
        import_external_transcripts(spec.project, numbered(texts));
    }

    spec.params = settings.params;
    if (j.contains("params")) {
        json p = spec.params;
        p.merge_patch(j.at("params"));
        spec.params = p.get<GenerationParams>();
    }
    spec.runs = j.value("runs", 10);
    spec.master_seed = j.value("master_seed", std::uint64_t{0});
    spec.options.concurrency_cap = j.value("concurrency_cap", 50);
    spec.options.max_attempts = j.value("max_attempts", 3);
    spec.options.timeout_s = j.value("timeout_s", 120);
    spec.options.retry_pause = std::chrono::milliseconds(j.value("retry_pause_ms", 2000));
    spec.options.retry_recitation = j.value("retry_recitation", false);
    out.output_dir = resolve(base, j.value("output_dir", std::string("experiment_out")));
    spec.validate();
    return out;
}

LoadedExperiment load_experiment_spec(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw workflows::WorkflowError("cannot open experiment spec " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw workflows::WorkflowError("invalid experiment spec " + path.string() + ": " + e.what());
    }
    return experiment_from_json(j, fs::absolute(path).parent_path());
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Transcribe, correct and score handwritten page images with multimodal models."};
    app.name("pearl");
    app.require_subcommand(1);

    std::string project_dir = "pearl_project";
    std::string settings_file;
    app.add_option("--project", project_dir, "Project directory")->capture_default_str();
    app.add_option("--settings", settings_file, "Settings file with prompts, parameters and profiles")
        ->check(CLI::ExistingFile);

    auto* import_cmd = app.add_subcommand("import", "Add page images from JPEG files, directories or PDFs");
    std::vector<std::string> import_paths;
    int dpi = 150;
    import_cmd->add_option("paths", import_paths, "JPEG files, directories of JPEGs, or PDF files")->required();
    import_cmd->add_option("--dpi", dpi, "PDF render resolution")->check(CLI::PositiveNumber);

    auto* transcribe_cmd = app.add_subcommand("transcribe", "Transcribe every page");
    BatchFlags transcribe_flags;
    transcribe_flags.attach(transcribe_cmd);

    auto* correct_cmd = app.add_subcommand("correct", "Correct every page's raw transcript");
    BatchFlags correct_flags;
    correct_flags.attach(correct_cmd);
    std::string correct_from = "llm";
    std::string external_dir;
    correct_cmd->add_option("--from", correct_from, "Source of the rough text")
        ->check(CLI::IsMember({"llm", "external"}));
    correct_cmd->add_option("--texts", external_dir, "Directory of external HTR .txt files, one per page")
        ->check(CLI::ExistingDirectory);

    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score transcripts against ground truth");
    std::string truth_dir;
    std::string hyp_dir;
    std::string eval_mode = "strict";
    std::string eval_level = "word";
    std::string eval_which;
    std::string csv_path;
    evaluate_cmd->add_option("--truth", truth_dir, "Directory of reference .txt files")
        ->required()
        ->check(CLI::ExistingDirectory);
    evaluate_cmd->add_option("--hyp", hyp_dir, "Score these .txt files instead of the project")
        ->check(CLI::ExistingDirectory);
    evaluate_cmd->add_option("--mode", eval_mode)->check(CLI::IsMember({"strict", "modified"}));
    evaluate_cmd->add_option("--level", eval_level)->check(CLI::IsMember({"word", "char", "character"}));
    evaluate_cmd->add_option("--which", eval_which)->check(CLI::IsMember({"raw", "corrected"}));
    evaluate_cmd->add_option("--csv", csv_path, "Write the error list as CSV");

    auto* export_cmd = app.add_subcommand("export", "Write all transcripts as one text");
    std::string export_which = "corrected";
    std::string export_out;
    std::string separator(kDefaultPageSeparator);
    export_cmd->add_option("--which", export_which)->check(CLI::IsMember({"raw", "corrected"}));
    export_cmd->add_option("--out", export_out, "Output file (default: stdout)");
    export_cmd->add_option("--separator", separator, "Page separator; {n} is the next page number");

    auto* experiment_cmd = app.add_subcommand("experiment", "Run a repeated evaluation experiment");
    std::string spec_path;
    experiment_cmd->add_option("--spec", spec_path, "Experiment spec (JSON)")->required()->check(CLI::ExistingFile);

    auto* serve_cmd = app.add_subcommand("serve", "Serve the project over the HTTP API");
    int port = 8080;
    std::string host = "127.0.0.1";
    serve_cmd->add_option("--port", port)->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--host", host);

    auto* replace_cmd = app.add_subcommand("replace", "Literal find and replace in transcripts");
    std::string find;
    std::string replacement;
    std::string replace_which = "raw";
    std::optional<std::size_t> replace_page;
    replace_cmd->add_option("--find", find)->required();
    replace_cmd->add_option("--replace", replacement)->required();
    replace_cmd->add_option("--which", replace_which)->check(CLI::IsMember({"raw", "corrected"}));
    replace_cmd->add_option("--page", replace_page, "Limit to one page (0-based index)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    const fs::path dir = project_dir;
    try {
        if (import_cmd->parsed()) {
            ProjectStore project = open_project(dir);
            apply_settings_file(project, settings_file);
            std::size_t added = 0;
            std::size_t failed = 0;
            for (const fs::path p : import_paths) {
                ImportReport report;
                std::string ext = p.extension().string();
                std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
                if (fs::is_directory(p)) {
                    report = import_image_directory(project, p);
                } else if (ext == ".pdf") {
                    report = import_pdf(project, p, dpi);
                } else {
                    report = import_images(project, std::span(&p, 1));
                }
                added += report.added.size();
                failed += report.failures.size();
                for (const auto& f : report.failures) err << "skipped " << f.path.string() << ": " << f.message << '\n';
            }
            save_project(project, dir);
            out << fmt::format("imported {} page(s); project has {} page(s)\n", added, project.pages.size());
            return added == 0 && failed > 0 ? kExitOperational : kExitOk;
        }
        if (transcribe_cmd->parsed()) {
            ProjectStore project = open_existing(dir);
            apply_settings_file(project, settings_file);
            return run_batch_command(batch::BatchTask::transcribe, transcribe_flags, project, dir, out, err);
        }
        if (correct_cmd->parsed()) {
            ProjectStore project = open_existing(dir);
            apply_settings_file(project, settings_file);
            if (correct_from == "external") {
                if (!external_dir.empty()) {
                    import_external_transcripts(project, numbered(providers::load_ground_truth(external_dir)));
                    save_project(project, dir);
                }
            } else if (!external_dir.empty()) {
                throw CliError("--texts needs --from external");
            }
            return run_batch_command(batch::BatchTask::correct, correct_flags, project, dir, out, err);
        }
        if (evaluate_cmd->parsed()) {
            const auto mode = metrics::mode_from_string(eval_mode);
            const auto level = metrics::level_from_string(eval_level);
            const auto truth = providers::load_ground_truth(truth_dir);
            ProjectStore project;
            TranscriptKind which = eval_which.empty() ? TranscriptKind::raw : transcript_kind_from_string(eval_which);
            if (!hyp_dir.empty()) {
                const auto hyps = providers::load_ground_truth(hyp_dir);
                for (std::size_t i = 0; i < hyps.size(); ++i) {
                    PageRecord page;
                    page.index = i;
                    page.transcript(which) = TranscriptText{hyps[i], TranscriptOrigin::external_htr};
                    project.pages.push_back(std::move(page));
                }
            } else {
                project = open_existing(dir);
                if (eval_which.empty() && !project.pages.empty() &&
                    std::all_of(project.pages.begin(), project.pages.end(),
                                [](const PageRecord& p) { return p.corrected_transcript.has_value(); })) {
                    which = TranscriptKind::corrected;
                }
            }
            const auto e = workflows::evaluate_project(project, truth, which, mode, level);
            const auto& c = e.pooled.counts;
            out << fmt::format("{} {:.4f}\n", level == metrics::MetricLevel::word ? "WER" : "CER", e.pooled.rate);
            out << fmt::format("substitutions {} deletions {} insertions {} correct {} reference {}\n",
                               c.substitutions, c.deletions, c.insertions, c.correct, c.reference);
            if (e.pooled.forgiven > 0) out << fmt::format("forgiven {}\n", e.pooled.forgiven);
            if (!csv_path.empty()) metrics::export_error_csv(std::span(&e.pooled, 1), csv_path);
            return kExitOk;
        }
        if (export_cmd->parsed()) {
            const ProjectStore project = open_existing(dir);
            const std::string text =
                export_text(project, transcript_kind_from_string(export_which), unescape(separator));
            if (export_out.empty()) {
                out << text;
            } else {
                std::ofstream f(export_out, std::ios::binary | std::ios::trunc);
                f << text;
                if (!f) throw CliError("cannot write " + export_out);
            }
            return kExitOk;
        }
        if (experiment_cmd->parsed()) {
            auto loaded = load_experiment_spec(spec_path);
            require_credential(loaded.spec.transcribe_profile);
            if (loaded.spec.correct_profile) require_credential(*loaded.spec.correct_profile);
            loaded.spec.options.sink = {};
            const auto report = workflows::run_experiment(loaded.spec);
            workflows::write_report(report, loaded.output_dir);
            out << workflows::report_table(report);
            out << "report written to " << loaded.output_dir.string() << '\n';
            if (!report.ok()) err << "error: " << report.error << '\n';
            return report.ok() ? kExitOk : kExitOperational;
        }
        if (serve_cmd->parsed()) {
            ProjectStore project = open_project(dir);
            apply_settings_file(project, settings_file);
            ProjectSession session(std::move(project), dir);
            ApiServer server(session);
            const int bound = server.bind(host, port);
            if (bound < 0) throw CliError(fmt::format("cannot bind {}:{}", host, port));
            out << fmt::format("serving {} on http://{}:{}/api/project\n", dir.string(), host, bound) << std::flush;
            return server.serve() ? kExitOk : kExitOperational;
        }
        if (replace_cmd->parsed()) {
            ProjectStore project = open_existing(dir);
            const auto scope = replace_page ? ReplaceScope::page : ReplaceScope::all;
            const std::size_t n = find_replace(project, transcript_kind_from_string(replace_which), find,
                                               replacement, scope, replace_page.value_or(0));
            if (n > 0) save_project(project, dir);
            out << fmt::format("{} replacement(s)\n", n);
            return kExitOk;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitOperational;
    }
    return kExitUsage;
}

}  // namespace pearl::frontdoor
