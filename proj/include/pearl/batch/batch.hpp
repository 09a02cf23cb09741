#pragma once

#include "pearl/core/project.hpp"
#include "pearl/providers/provider.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pearl::batch {

class BatchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class BatchTask { transcribe, correct };
std::string_view to_string(BatchTask t);
BatchTask batch_task_from_string(std::string_view s);

struct BatchSpec {
    BatchTask task = BatchTask::transcribe;
    ProviderProfile profile;
    GenerationParams params;
    PromptTemplate prompt;       // empty system and user: taken from the project settings
    int concurrency_cap = 50;
    int max_attempts = 3;        // total attempts, first included
    int timeout_s = 120;
    std::chrono::milliseconds retry_pause{2000};
    bool retry_recitation = false;

    void validate() const;
};

enum class ProgressPhase { started, retrying, done, failed };
std::string_view to_string(ProgressPhase p);

struct ProgressEvent {
    std::size_t page = 0;
    ProgressPhase phase = ProgressPhase::started;
    int attempt = 1;
    std::string timestamp;
    std::string detail;  // error message for retrying and failed
};

void to_json(nlohmann::json& j, const ProgressEvent& e);

// Called from worker threads, one event at a time.
using ProgressSink = std::function<void(const ProgressEvent&)>;

struct PageResult {
    std::size_t page = 0;
    bool ok = false;
    std::optional<TranscriptText> text;
    bool marker_missing = false;
    int attempts = 0;
    TokenUsage usage;
    double cost_usd = 0.0;
    std::int64_t latency_ms = 0;  // of the successful attempt
    std::optional<providers::ErrorClass> error_class;
    std::string error;
    std::string payload;
};

struct BatchStats {
    std::size_t pages = 0;
    double wall_time_s = 0.0;
    double per_page_s = 0.0;
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    bool tokens_estimated = false;
    double cost_usd = 0.0;
    std::size_t pages_ok = 0;
    std::size_t pages_failed = 0;
    std::map<int, std::size_t> attempts_histogram;  // attempts -> pages
};

void to_json(nlohmann::json& j, const BatchStats& s);

struct BatchResult {
    std::vector<PageResult> pages;  // pages[i] belongs to page i
    BatchStats stats;
};

// Dollar cost of a token total at the profile's per-million prices.
double compute_cost(const TokenUsage& usage, const ProviderProfile& profile);
// Rounded to cents for display, e.g. "$0.49".
std::string format_usd(double dollars);
// Seconds per page as wall time over page count.
double seconds_per_page(double wall_time_s, std::size_t pages);

bool is_retryable(const providers::ProviderError& error, bool retry_recitation);

// Fans pages out to up to concurrency_cap workers over `provider`. Per-page
// failures are recorded in the result; only an empty project throws.
BatchResult run_batch(const ProjectStore& snapshot, const BatchSpec& spec, providers::Provider& provider,
                      const ProgressSink& sink = {});

// Line-delimited JSON mirror of progress events.
class JsonlProgressLog {
public:
    explicit JsonlProgressLog(const std::filesystem::path& path);
    void operator()(const ProgressEvent& event);
    ProgressSink sink();

private:
    std::mutex mutex_;
    std::ofstream out_;
};

}  // namespace pearl::batch
