#pragma once

#include "pearl/workflows/workflows.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <thread>

namespace pearl::frontdoor {

// Maps to HTTP 404.
class NotFound : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Maps to HTTP 409: a job is running or owns the page being mutated.
class Conflict : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Maps to HTTP 400.
class BadRequest : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class JobState { queued, running, done, failed };
std::string_view to_string(JobState s);

struct JobRequest {
    std::string kind;     // transcribe | correct | evaluate
    std::string profile;  // empty: from settings
    std::optional<GenerationParams> params;
    // evaluate only
    std::vector<std::string> truth;
    metrics::MetricMode mode = metrics::MetricMode::strict;
    metrics::MetricLevel level = metrics::MetricLevel::character;
    std::optional<TranscriptKind> which;
};

struct JobHandle {
    std::string job_id;
    std::string kind;
    JobState state = JobState::queued;
    std::size_t done = 0;
    std::size_t failed_pages = 0;
    std::size_t total = 0;
    std::string started;
    std::string finished;
    std::string error;
    std::vector<std::string> warnings;
    std::optional<batch::BatchStats> stats;
    nlohmann::json result;  // evaluation summary for evaluate jobs
};

nlohmann::json to_json(const JobHandle& job);
nlohmann::json page_json(const PageRecord& page);
nlohmann::json evaluation_json(const workflows::Evaluation& e);

struct SessionOptions {
    workflows::WorkflowOptions workflow;
    metrics::MetricOptions metric_options;
};

// Owns one project. Readers share a lock; every mutation funnels through this
// object, which persists the project after each change when it has a directory.
class ProjectSession {
public:
    ProjectSession(ProjectStore project, std::filesystem::path dir = {}, SessionOptions options = {});
    ~ProjectSession();
    ProjectSession(const ProjectSession&) = delete;
    ProjectSession& operator=(const ProjectSession&) = delete;

    ProjectStore snapshot() const;
    nlohmann::json project_json() const;
    nlohmann::json page(std::size_t index) const;
    ImageAsset image(std::size_t index) const;

    nlohmann::json edit(std::size_t index, TranscriptKind which, std::string text);
    std::size_t replace(TranscriptKind which, const std::string& find, const std::string& with, ReplaceScope scope,
                        std::size_t page);

    Settings settings() const;
    // Applies a partial JSON document over the current settings.
    Settings patch_settings(const nlohmann::json& patch);

    workflows::Evaluation evaluate(std::span<const std::string> truth, std::optional<TranscriptKind> which,
                                   metrics::MetricMode mode, metrics::MetricLevel level) const;

    JobHandle start_job(const JobRequest& request);
    JobHandle job(const std::string& id) const;
    std::optional<std::string> running_job() const;
    void wait_for_job();

private:
    void persist_locked();
    void check_page_free(std::size_t index) const;
    void run_job(std::string id, JobRequest request, ProviderProfile profile, GenerationParams params);
    void update_job(const std::string& id, const std::function<void(JobHandle&)>& fn);

    mutable std::shared_mutex mutex_;
    ProjectStore project_;
    std::filesystem::path dir_;
    SessionOptions options_;
    std::set<std::size_t> busy_pages_;

    mutable std::mutex jobs_mutex_;
    std::map<std::string, JobHandle> jobs_;
    std::optional<std::string> running_;
    std::thread worker_;
    int next_job_ = 1;
};

}  // namespace pearl::frontdoor
