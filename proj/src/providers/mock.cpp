#include "pearl/providers/mock.hpp"

#include "pearl/metrics/normalize.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

namespace pearl::providers {
namespace {

// Sequential generator over splitmix64; doubles use the top 53 bits.
class MockRng {
public:
    explicit MockRng(std::uint64_t state) : state_(state) {}
    std::uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return splitmix64(state_);
    }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    std::uint64_t below(std::uint64_t n) { return next() % n; }

private:
    std::uint64_t state_;
};

std::uint64_t stream_seed(std::uint64_t seed, std::size_t page, int attempt) {
    return splitmix64(seed ^ splitmix64((static_cast<std::uint64_t>(page) << 20) + static_cast<std::uint64_t>(attempt)));
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

MockOutcome mock_outcome_from_string(std::string_view s) {
    if (s == "succeed") return MockOutcome::succeed;
    if (s == "fail") return MockOutcome::fail;
    if (s == "recite") return MockOutcome::recite;
    if (s == "timeout") return MockOutcome::timeout;
    if (s == "http_429") return MockOutcome::http_429;
    if (s == "http_500") return MockOutcome::http_500;
    if (s == "auth") return MockOutcome::auth;
    if (s == "empty") return MockOutcome::empty;
    throw SettingsError("unknown mock outcome: " + std::string(s));
}

MockOutcome scheduled_outcome(const MockBehavior& behavior, std::size_t page, int attempt) {
    const auto it = behavior.failure_schedule.find(page);
    if (it == behavior.failure_schedule.end() || attempt < 1) return MockOutcome::succeed;
    const auto& outcomes = it->second;
    const auto k = static_cast<std::size_t>(attempt - 1);
    return k < outcomes.size() ? outcomes[k] : MockOutcome::succeed;
}

std::string corrupt_text(const MockBehavior& behavior, std::string_view text, std::size_t page, int attempt) {
    if (behavior.char_sub_rate <= 0.0) return std::string(text);
    std::u32string chars = metrics::to_utf32(text);
    MockRng rng(stream_seed(behavior.seed, page, attempt));
    const auto& alphabet = behavior.alphabet;
    for (auto& c : chars) {
        if (rng.uniform() >= behavior.char_sub_rate) continue;
        const bool in_alphabet = alphabet.find(c) != std::u32string::npos;
        const std::size_t choices = alphabet.size() - (in_alphabet ? 1 : 0);
        if (choices == 0) continue;
        std::size_t pick = rng.below(choices);
        for (char32_t candidate : alphabet) {
            if (candidate == c) continue;
            if (pick-- == 0) {
                c = candidate;
                break;
            }
        }
    }
    return metrics::to_utf8(chars);
}

CompletionResult mock_complete(const MockBehavior& behavior, std::size_t page, int attempt, std::string_view marker,
                               const std::optional<std::string>& rough, std::string_view prompt_text) {
    switch (scheduled_outcome(behavior, page, attempt)) {
        case MockOutcome::succeed: break;
        case MockOutcome::fail:
            throw ProviderError(ErrorClass::transport, "mock transport failure", "connection reset");
        case MockOutcome::recite:
            throw ProviderError(ErrorClass::recitation, "provider stopped with reason recitation",
                                R"({"finishReason":"RECITATION"})");
        case MockOutcome::timeout: throw ProviderError(ErrorClass::timeout, "mock request timed out");
        case MockOutcome::http_429:
            throw ProviderError(ErrorClass::http_status, "HTTP 429", R"({"error":"rate limited"})", 429);
        case MockOutcome::http_500:
            throw ProviderError(ErrorClass::http_status, "HTTP 500", R"({"error":"server error"})", 500);
        case MockOutcome::auth:
            throw ProviderError(ErrorClass::auth, "HTTP 401", R"({"error":"invalid key"})", 401);
        case MockOutcome::empty: {
            CompletionResult empty;
            empty.latency_ms = behavior.fixed_latency_ms;
            return empty;
        }
    }

    std::string body;
    if (behavior.echo_rough) {
        if (!rough) throw ProviderError(ErrorClass::invalid_request, "echo mock needs a rough transcription");
        body = *rough;
    } else {
        if (page >= behavior.ground_truth.size()) {
            throw ProviderError(ErrorClass::invalid_request,
                                "mock has no ground truth for page " + std::to_string(page));
        }
        body = corrupt_text(behavior, behavior.ground_truth[page], page, attempt);
    }

    CompletionResult result;
    result.text = std::string(marker) + body;
    result.stop_reason = StopReason::stop;
    result.usage.input_tokens = estimate_tokens(prompt_text.empty() ? std::string_view(body) : prompt_text);
    result.usage.output_tokens = estimate_tokens(body);
    result.latency_ms = behavior.fixed_latency_ms;
    return result;
}

std::vector<std::string> load_ground_truth(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) {
        throw ProviderError(ErrorClass::invalid_request, "ground-truth directory not found: " + dir.string());
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
    std::vector<std::string> texts;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        texts.push_back(ss.str());
    }
    return texts;
}

MockBehavior behavior_from_profile(const ProviderProfile& profile) {
    MockBehavior b;
    const auto& m = profile.mock;
    if (!m.truth_dir.empty()) b.ground_truth = load_ground_truth(m.truth_dir);
    b.char_sub_rate = m.char_sub_rate;
    b.seed = m.seed;
    b.fixed_latency_ms = m.latency_ms;
    b.echo_rough = m.echo_rough;
    for (const auto& [page, outcomes] : m.schedule) {
        auto& out = b.failure_schedule[page];
        for (const auto& o : outcomes) out.push_back(mock_outcome_from_string(o));
    }
    return b;
}

MockProvider::MockProvider(ProviderProfile profile, MockBehavior behavior)
    : profile_(std::move(profile)), behavior_(std::move(behavior)) {}

CompletionResult MockProvider::send(const ProviderRequest& request, const GenerationParams& params) {
    params.validate();
    ++calls_;
    const int now = ++in_flight_;
    int seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    struct Leave {
        std::atomic<int>& counter;
        ~Leave() { --counter; }
    } leave{in_flight_};

    if (behavior_.fixed_latency_ms > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(behavior_.fixed_latency_ms));
    }
    const std::string prompt = request.system + "\n\n" + request.user_text();
    return mock_complete(behavior_, request.page_index, request.attempt, request.answer_marker, request.rough, prompt);
}

}  // namespace pearl::providers
