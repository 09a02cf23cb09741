#pragma once

#include "pearl/providers/provider.hpp"

#include <atomic>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pearl::providers {

enum class MockOutcome { succeed, fail, recite, timeout, http_429, http_500, auth, empty };
MockOutcome mock_outcome_from_string(std::string_view s);

struct MockBehavior {
    std::vector<std::string> ground_truth;  // indexed by page
    double char_sub_rate = 0.0;
    std::map<std::size_t, std::vector<MockOutcome>> failure_schedule;  // attempts past the list succeed
    std::uint64_t seed = 0;
    int fixed_latency_ms = 0;
    bool echo_rough = false;            // reply with the request's rough text instead of ground truth
    std::u32string alphabet = U"abcdefghijklmnopqrstuvwxyz";
};

// Outcome for (page, attempt); attempt is 1-based.
MockOutcome scheduled_outcome(const MockBehavior& behavior, std::size_t page, int attempt);

// Ground truth for `page` with each code point replaced, with probability
// char_sub_rate, by a different alphabet letter. Pure function of
// (seed, rate, page, attempt).
std::string corrupt_text(const MockBehavior& behavior, std::string_view text, std::size_t page, int attempt);

// Deterministic completion. Throws ProviderError for scripted failures.
CompletionResult mock_complete(const MockBehavior& behavior, std::size_t page, int attempt,
                               std::string_view marker = "Transcription:",
                               const std::optional<std::string>& rough = std::nullopt,
                               std::string_view prompt_text = {});

// Reads *.txt from `dir` in lexicographic order, one per page.
std::vector<std::string> load_ground_truth(const std::filesystem::path& dir);

MockBehavior behavior_from_profile(const ProviderProfile& profile);

// 64-bit mixer shared by the mock and the experiment seed derivation.
std::uint64_t splitmix64(std::uint64_t x);

class MockProvider : public Provider {
public:
    MockProvider(ProviderProfile profile, MockBehavior behavior);

    const ProviderProfile& profile() const override { return profile_; }
    CompletionResult send(const ProviderRequest& request, const GenerationParams& params) override;

    const MockBehavior& behavior() const { return behavior_; }
    int max_in_flight() const { return max_in_flight_.load(); }
    int calls() const { return calls_.load(); }

private:
    ProviderProfile profile_;
    MockBehavior behavior_;
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_in_flight_{0};
    std::atomic<int> calls_{0};
};

}  // namespace pearl::providers
