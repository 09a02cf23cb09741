#include "pearl/batch/batch.hpp"

#include "pearl/providers/prompt.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace pearl::batch {

using providers::ErrorClass;
using providers::ProviderError;

std::string_view to_string(BatchTask t) { return t == BatchTask::transcribe ? "transcribe" : "correct"; }

BatchTask batch_task_from_string(std::string_view s) {
    if (s == "transcribe") return BatchTask::transcribe;
    if (s == "correct") return BatchTask::correct;
    throw BatchError("unknown task: " + std::string(s));
}

std::string_view to_string(ProgressPhase p) {
    switch (p) {
        case ProgressPhase::started: return "started";
        case ProgressPhase::retrying: return "retrying";
        case ProgressPhase::done: return "done";
        case ProgressPhase::failed: return "failed";
    }
    return "started";
}

void BatchSpec::validate() const {
    if (concurrency_cap < 1) throw BatchError("concurrency_cap must be >= 1");
    if (max_attempts < 1) throw BatchError("max_attempts must be >= 1");
    if (timeout_s < 1) throw BatchError("timeout_s must be >= 1");
    if (retry_pause.count() < 0) throw BatchError("retry_pause must be >= 0");
    profile.validate();
    params.validate();
}

void to_json(nlohmann::json& j, const ProgressEvent& e) {
    j = {{"page", e.page}, {"phase", to_string(e.phase)}, {"attempt", e.attempt}, {"timestamp", e.timestamp}};
    if (!e.detail.empty()) j["detail"] = e.detail;
}

void to_json(nlohmann::json& j, const BatchStats& s) {
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [attempts, pages] : s.attempts_histogram) hist[std::to_string(attempts)] = pages;
    j = {{"pages", s.pages},
         {"wall_time_s", s.wall_time_s},
         {"per_page_s", s.per_page_s},
         {"input_tokens", s.input_tokens},
         {"output_tokens", s.output_tokens},
         {"tokens_estimated", s.tokens_estimated},
         {"cost_usd", s.cost_usd},
         {"pages_ok", s.pages_ok},
         {"pages_failed", s.pages_failed},
         {"attempts_histogram", hist}};
}

double compute_cost(const TokenUsage& usage, const ProviderProfile& profile) {
    return static_cast<double>(usage.input_tokens) * profile.price_in / 1e6 +
           static_cast<double>(usage.output_tokens) * profile.price_out / 1e6;
}

std::string format_usd(double dollars) {
    // Nudge by a tiny epsilon so binary representation (0.485 -> 0.48499...)
    // does not flip half-cent values downwards.
    const double cents = std::floor(dollars * 100.0 + 0.5 + 1e-9);
    return fmt::format("${:.2f}", cents / 100.0);
}

double seconds_per_page(double wall_time_s, std::size_t pages) {
    return pages == 0 ? 0.0 : wall_time_s / static_cast<double>(pages);
}

bool is_retryable(const ProviderError& error, bool retry_recitation) {
    switch (error.error_class()) {
        case ErrorClass::transport:
        case ErrorClass::timeout:
        case ErrorClass::empty_completion:
        case ErrorClass::unparseable: return true;
        case ErrorClass::http_status: return error.http_status() == 429 || error.http_status() >= 500;
        case ErrorClass::recitation: return retry_recitation;
        case ErrorClass::auth:
        case ErrorClass::invalid_request: return false;
    }
    return false;
}

namespace {

using Clock = std::chrono::steady_clock;

// Serializes sink calls and tracks the first-request/last-response window.
class Recorder {
public:
    explicit Recorder(const ProgressSink& sink) : sink_(sink) {}

    void emit(std::size_t page, ProgressPhase phase, int attempt, std::string detail = {}) {
        if (!sink_) return;
        ProgressEvent e{page, phase, attempt, utc_timestamp(), std::move(detail)};
        std::lock_guard lock(mutex_);
        sink_(e);
    }

    void request_started(Clock::time_point t) {
        std::lock_guard lock(mutex_);
        if (!first_ || t < *first_) first_ = t;
    }
    void response_received(Clock::time_point t) {
        std::lock_guard lock(mutex_);
        if (!last_ || t > *last_) last_ = t;
    }
    double wall_seconds() const {
        if (!first_ || !last_) return 0.0;
        return std::chrono::duration<double>(*last_ - *first_).count();
    }

private:
    const ProgressSink& sink_;
    std::mutex mutex_;
    std::optional<Clock::time_point> first_;
    std::optional<Clock::time_point> last_;
};

void fail(PageResult& r, ErrorClass cls, std::string message, std::string payload = {}) {
    r.ok = false;
    r.error_class = cls;
    r.error = std::move(message);
    r.payload = std::move(payload);
}

PageResult run_page(const PageRecord& page, const BatchSpec& spec, const PromptTemplate& prompt,
                    providers::Provider& provider, Recorder& recorder) {
    PageResult result;
    result.page = page.index;

    std::optional<TranscriptText> rough;
    if (spec.task == BatchTask::correct) {
        if (!page.raw_transcript) {
            fail(result, ErrorClass::invalid_request, "page has no raw transcript");
            recorder.emit(page.index, ProgressPhase::failed, 0, result.error);
            return result;
        }
        rough = page.raw_transcript;
    }
    providers::ProviderRequest request;
    try {
        request = providers::render_prompt(prompt, page.image, rough);
    } catch (const ProviderError& e) {
        fail(result, e.error_class(), e.what());
        recorder.emit(page.index, ProgressPhase::failed, 0, result.error);
        return result;
    }
    request.page_index = page.index;

    for (int attempt = 1; attempt <= spec.max_attempts; ++attempt) {
        request.attempt = attempt;
        result.attempts = attempt;
        if (attempt == 1) {
            recorder.emit(page.index, ProgressPhase::started, attempt);
        } else {
            recorder.emit(page.index, ProgressPhase::retrying, attempt, result.error);
            if (spec.retry_pause.count() > 0) std::this_thread::sleep_for(spec.retry_pause);
        }
        recorder.request_started(Clock::now());
        try {
            providers::CompletionResult reply;
            try {
                reply = provider.send(request, spec.params);
            } catch (...) {
                recorder.response_received(Clock::now());
                throw;
            }
            recorder.response_received(Clock::now());
            auto answer = providers::extract_answer(reply, prompt.answer_marker);
            result.ok = true;
            result.text = std::move(answer.text);
            result.marker_missing = answer.marker_missing;
            result.usage = reply.usage;
            result.latency_ms = reply.latency_ms;
            result.cost_usd = compute_cost(reply.usage, spec.profile);
            result.error_class.reset();
            result.error.clear();
            result.payload.clear();
            recorder.emit(page.index, ProgressPhase::done, attempt);
            return result;
        } catch (const ProviderError& e) {
            fail(result, e.error_class(), e.what(), e.payload());
            if (!is_retryable(e, spec.retry_recitation)) break;
        } catch (const std::exception& e) {
            fail(result, ErrorClass::invalid_request, e.what());
            break;
        }
    }
    recorder.emit(page.index, ProgressPhase::failed, result.attempts, result.error);
    return result;
}

}  // namespace

BatchResult run_batch(const ProjectStore& snapshot, const BatchSpec& spec, providers::Provider& provider,
                      const ProgressSink& sink) {
    spec.validate();
    const std::size_t n = snapshot.pages.size();
    if (n == 0) throw BatchError("project has no pages");

    const PromptTemplate& prompt = spec.prompt.user.empty()
                                       ? (spec.task == BatchTask::transcribe ? snapshot.settings.prompts.transcribe
                                                                             : snapshot.settings.prompts.correct)
                                       : spec.prompt;
    prompt.validate();

    BatchResult out;
    out.pages.resize(n);
    Recorder recorder(sink);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            out.pages[i] = run_page(snapshot.pages[i], spec, prompt, provider, recorder);
            out.pages[i].page = i;
        }
    };
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(spec.concurrency_cap), n);
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    auto& s = out.stats;
    s.pages = n;
    s.wall_time_s = recorder.wall_seconds();
    s.per_page_s = seconds_per_page(s.wall_time_s, n);
    for (const auto& r : out.pages) {
        ++s.attempts_histogram[r.attempts];
        if (r.ok) {
            ++s.pages_ok;
            s.input_tokens += r.usage.input_tokens;
            s.output_tokens += r.usage.output_tokens;
            s.tokens_estimated = s.tokens_estimated || r.usage.estimated;
            s.cost_usd += r.cost_usd;
        } else {
            ++s.pages_failed;
        }
    }
    return out;
}

JsonlProgressLog::JsonlProgressLog(const std::filesystem::path& path) : out_(path, std::ios::app) {
    if (!out_) throw BatchError("cannot open progress log " + path.string());
}

void JsonlProgressLog::operator()(const ProgressEvent& event) {
    std::lock_guard lock(mutex_);
    out_ << nlohmann::json(event).dump() << '\n';
    out_.flush();
}

ProgressSink JsonlProgressLog::sink() {
    return [this](const ProgressEvent& e) { (*this)(e); };
}

}  // namespace pearl::batch
