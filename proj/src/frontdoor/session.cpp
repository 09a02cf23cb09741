#include "pearl/frontdoor/session.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace pearl::frontdoor {

std::string_view to_string(JobState s) {
    switch (s) {
        case JobState::queued: return "queued";
        case JobState::running: return "running";
        case JobState::done: return "done";
        case JobState::failed: return "failed";
    }
    return "queued";
}

nlohmann::json to_json(const JobHandle& job) {
    nlohmann::json j = {{"job_id", job.job_id},
                        {"kind", job.kind},
                        {"state", to_string(job.state)},
                        {"progress", {{"done", job.done}, {"failed", job.failed_pages}, {"total", job.total}}},
                        {"started", job.started},
                        {"finished", job.finished},
                        {"warnings", job.warnings}};
    if (!job.error.empty()) j["error"] = job.error;
    if (job.stats) j["stats"] = *job.stats;
    if (!job.result.is_null()) j["result"] = job.result;
    return j;
}

nlohmann::json page_json(const PageRecord& page) {
    ProjectStore one;
    one.pages.push_back(page);
    auto j = manifest_json(one)["pages"][0];
    j.erase("image_file");
    j["image_url"] = fmt::format("/api/pages/{}/image", page.index);
    return j;
}

nlohmann::json evaluation_json(const workflows::Evaluation& e) {
    const auto& r = e.pooled;
    nlohmann::json pages = nlohmann::json::array();
    for (const auto& rate : e.page_rates) pages.push_back(rate ? nlohmann::json(*rate) : nlohmann::json(nullptr));
    return {{"which", to_string(e.which)},
            {"mode", metrics::to_string(r.mode)},
            {"level", metrics::to_string(r.level)},
            {"rate", r.rate},
            {"substitutions", r.counts.substitutions},
            {"deletions", r.counts.deletions},
            {"insertions", r.counts.insertions},
            {"correct", r.counts.correct},
            {"reference", r.counts.reference},
            {"forgiven", r.forgiven},
            {"page_rates", std::move(pages)}};
}

ProjectSession::ProjectSession(ProjectStore project, std::filesystem::path dir, SessionOptions options)
    : project_(std::move(project)), dir_(std::move(dir)), options_(std::move(options)) {}

ProjectSession::~ProjectSession() { wait_for_job(); }

ProjectStore ProjectSession::snapshot() const {
    std::shared_lock lock(mutex_);
    return project_;
}

nlohmann::json ProjectSession::project_json() const {
    const auto running = running_job();
    std::shared_lock lock(mutex_);
    auto j = manifest_json(project_);
    for (auto& p : j["pages"]) {
        p.erase("image_file");
        p["image_url"] = fmt::format("/api/pages/{}/image", p["index"].get<std::size_t>());
    }
    if (running) j["running_job"] = *running;
    return j;
}

nlohmann::json ProjectSession::page(std::size_t index) const {
    std::shared_lock lock(mutex_);
    if (index >= project_.pages.size()) throw NotFound(fmt::format("no page {}", index));
    return page_json(project_.pages[index]);
}

ImageAsset ProjectSession::image(std::size_t index) const {
    std::shared_lock lock(mutex_);
    if (index >= project_.pages.size()) throw NotFound(fmt::format("no page {}", index));
    return project_.pages[index].image;
}

void ProjectSession::check_page_free(std::size_t index) const {
    if (busy_pages_.count(index)) throw Conflict(fmt::format("page {} is being written by a running job", index));
}

void ProjectSession::persist_locked() {
    project_.touch();
    if (!dir_.empty()) save_project(project_, dir_);
}

nlohmann::json ProjectSession::edit(std::size_t index, TranscriptKind which, std::string text) {
    std::unique_lock lock(mutex_);
    if (index >= project_.pages.size()) throw NotFound(fmt::format("no page {}", index));
    check_page_free(index);
    try {
        edit_transcript(project_, index, which, std::move(text));
    } catch (const ProjectError& e) {
        throw BadRequest(e.what());
    }
    persist_locked();
    return page_json(project_.pages[index]);
}

std::size_t ProjectSession::replace(TranscriptKind which, const std::string& find, const std::string& with,
                                    ReplaceScope scope, std::size_t page) {
    std::unique_lock lock(mutex_);
    if (scope == ReplaceScope::page) {
        if (page >= project_.pages.size()) throw NotFound(fmt::format("no page {}", page));
        check_page_free(page);
    } else if (!busy_pages_.empty()) {
        throw Conflict("a running job is writing pages");
    }
    std::size_t n = 0;
    try {
        n = find_replace(project_, which, find, with, scope, page);
    } catch (const ProjectError& e) {
        throw BadRequest(e.what());
    }
    if (n > 0) persist_locked();
    return n;
}

Settings ProjectSession::settings() const {
    std::shared_lock lock(mutex_);
    return project_.settings;
}

Settings ProjectSession::patch_settings(const nlohmann::json& patch) {
    if (!patch.is_object()) throw BadRequest("settings body must be a JSON object");
    std::unique_lock lock(mutex_);
    nlohmann::json doc = project_.settings;
    doc.merge_patch(patch);
    Settings next;
    try {
        next = doc.get<Settings>();
        next.prompts.validate();
        next.params.validate();
        for (const auto& p : next.profiles) p.validate();
        next.profile(next.active_profile);
        if (!next.correct_profile.empty()) next.profile(next.correct_profile);
    } catch (const SettingsError& e) {
        throw BadRequest(e.what());
    } catch (const nlohmann::json::exception& e) {
        throw BadRequest(std::string("malformed settings: ") + e.what());
    }
    project_.settings = std::move(next);
    persist_locked();
    return project_.settings;
}

workflows::Evaluation ProjectSession::evaluate(std::span<const std::string> truth, std::optional<TranscriptKind> which,
                                               metrics::MetricMode mode, metrics::MetricLevel level) const {
    const ProjectStore copy = snapshot();
    // Default to the most processed field present on every page.
    TranscriptKind kind = TranscriptKind::raw;
    if (which) {
        kind = *which;
    } else if (!copy.pages.empty() && std::all_of(copy.pages.begin(), copy.pages.end(), [](const PageRecord& p) {
                   return p.corrected_transcript.has_value();
               })) {
        kind = TranscriptKind::corrected;
    }
    try {
        return workflows::evaluate_project(copy, truth, kind, mode, level, options_.metric_options);
    } catch (const workflows::WorkflowError& e) {
        throw BadRequest(e.what());
    }
}

std::optional<std::string> ProjectSession::running_job() const {
    std::lock_guard lock(jobs_mutex_);
    return running_;
}

JobHandle ProjectSession::job(const std::string& id) const {
    std::lock_guard lock(jobs_mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) throw NotFound("no job " + id);
    return it->second;
}

void ProjectSession::update_job(const std::string& id, const std::function<void(JobHandle&)>& fn) {
    std::lock_guard lock(jobs_mutex_);
    fn(jobs_.at(id));
}

void ProjectSession::wait_for_job() {
    std::thread t;
    {
        std::lock_guard lock(jobs_mutex_);
        t = std::move(worker_);
    }
    if (t.joinable()) t.join();
}

JobHandle ProjectSession::start_job(const JobRequest& request) {
    if (request.kind != "transcribe" && request.kind != "correct" && request.kind != "evaluate") {
        throw BadRequest("unknown job kind: " + request.kind);
    }
    ProviderProfile profile;
    GenerationParams params;
    std::size_t total = 0;
    {
        std::shared_lock lock(mutex_);
        total = project_.pages.size();
        if (total == 0) throw BadRequest("project has no pages");
        const Settings& s = project_.settings;
        params = request.params.value_or(s.params);
        if (request.kind != "evaluate") {
            std::string name = request.profile;
            if (name.empty()) name = request.kind == "correct" && !s.correct_profile.empty() ? s.correct_profile
                                                                                             : s.active_profile;
            try {
                profile = s.profile(name);
                params.validate();
            } catch (const SettingsError& e) {
                throw BadRequest(e.what());
            }
        } else if (request.truth.size() != total) {
            throw BadRequest(fmt::format("{} reference texts for {} pages", request.truth.size(), total));
        }
    }
    // Fail fast on a missing key rather than after the job is accepted.
    if (request.kind != "evaluate" && profile.dialect != RequestDialect::mock) {
        try {
            providers::resolve_credential(profile);
        } catch (const providers::ProviderError& e) {
            throw BadRequest(e.what());
        }
    }

    std::lock_guard jobs_lock(jobs_mutex_);
    if (running_) throw Conflict("job " + *running_ + " is still running");
    if (worker_.joinable()) worker_.join();
    JobHandle handle;
    handle.job_id = fmt::format("job-{}", next_job_++);
    handle.kind = request.kind;
    handle.total = total;
    jobs_[handle.job_id] = handle;
    running_ = handle.job_id;
    if (request.kind != "evaluate") {
        std::unique_lock lock(mutex_);
        for (std::size_t i = 0; i < total; ++i) busy_pages_.insert(i);
    }
    worker_ = std::thread(&ProjectSession::run_job, this, handle.job_id, request, profile, params);
    return handle;
}

void ProjectSession::run_job(std::string id, JobRequest request, ProviderProfile profile, GenerationParams params) {
    update_job(id, [](JobHandle& j) {
        j.state = JobState::running;
        j.started = utc_timestamp();
    });
    ProjectStore work = snapshot();
    JobState state = JobState::done;
    std::string error;
    try {
        if (request.kind == "evaluate") {
            const auto e = workflows::evaluate_project(work, request.truth,
                                                       request.which.value_or(TranscriptKind::raw), request.mode,
                                                       request.level, options_.metric_options);
            update_job(id, [&](JobHandle& j) {
                j.result = evaluation_json(e);
                j.done = j.total;
            });
        } else {
            auto options = options_.workflow;
            const auto outer = options.sink;
            options.sink = [this, &id, outer](const batch::ProgressEvent& e) {
                if (outer) outer(e);
                if (e.phase == batch::ProgressPhase::done || e.phase == batch::ProgressPhase::failed) {
                    update_job(id, [&](JobHandle& j) {
                        ++j.done;
                        if (e.phase == batch::ProgressPhase::failed) ++j.failed_pages;
                    });
                }
            };
            const auto outcome = request.kind == "transcribe"
                                     ? workflows::transcribe_all(work, profile, params, options)
                                     : workflows::correct_all(work, profile, params, options);
            {
                // Pages stayed locked for the whole job, so copying them back
                // cannot clobber an operator edit.
                std::unique_lock lock(mutex_);
                for (std::size_t i = 0; i < work.pages.size() && i < project_.pages.size(); ++i) {
                    project_.pages[i] = work.pages[i];
                }
                persist_locked();
            }
            update_job(id, [&](JobHandle& j) {
                j.stats = outcome.batch.stats;
                j.warnings = outcome.warnings;
            });
        }
    } catch (const std::exception& e) {
        spdlog::error("job {} failed: {}", id, e.what());
        state = JobState::failed;
        error = e.what();
    }
    {
        std::unique_lock lock(mutex_);
        busy_pages_.clear();
    }
    // A client that sees a terminal state may start the next job at once.
    std::lock_guard lock(jobs_mutex_);
    auto& j = jobs_.at(id);
    j.state = state;
    j.error = error;
    j.finished = utc_timestamp();
    running_.reset();
}

}  // namespace pearl::frontdoor
