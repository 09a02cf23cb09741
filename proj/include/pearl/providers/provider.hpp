#pragma once

#include "pearl/core/image.hpp"
#include "pearl/core/project.hpp"
#include "pearl/core/settings.hpp"

#include <chrono>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pearl::providers {

enum class StopReason { stop, length, recitation, content_filter, other };
std::string_view to_string(StopReason r);

struct CompletionResult {
    std::string text;
    StopReason stop_reason = StopReason::stop;
    TokenUsage usage;
    std::int64_t latency_ms = 0;
};

// One part of the user turn, in order. Image parts carry no text.
struct UserPart {
    enum class Kind { text, image } kind = Kind::text;
    std::string text;
};

struct ProviderRequest {
    std::string system;
    std::vector<UserPart> user_parts;
    ImageAsset image;
    std::optional<std::string> rough;  // raw text embedded in the user turn, if any
    std::string answer_marker;

    // Routing metadata; never sent over the wire.
    std::size_t page_index = 0;
    int attempt = 1;

    std::string user_text() const;
};

// Every failed send maps to exactly one class.
enum class ErrorClass {
    transport,         // connection refused, reset, DNS
    timeout,           // no response within the configured deadline
    http_status,       // HTTP >= 400 other than auth
    auth,              // HTTP 401/403 or credential missing from the environment
    unparseable,       // body is not the dialect's JSON shape
    recitation,        // provider stopped because the output would recite training data
    empty_completion,  // reply carried no text
    invalid_request,   // rejected locally before any network activity
};
std::string_view to_string(ErrorClass c);

class ProviderError : public std::runtime_error {
public:
    ProviderError(ErrorClass cls, std::string message, std::string payload = {}, int http_status = 0)
        : std::runtime_error(std::move(message)), class_(cls), payload_(std::move(payload)), http_status_(http_status) {}

    ErrorClass error_class() const { return class_; }
    const std::string& payload() const { return payload_; }
    int http_status() const { return http_status_; }

private:
    ErrorClass class_;
    std::string payload_;
    int http_status_;
};

// A configured back-end. Implementations are reentrant: concurrent sends on
// one instance are allowed.
class Provider {
public:
    virtual ~Provider() = default;
    virtual const ProviderProfile& profile() const = 0;
    // One round-trip, no retries. Throws ProviderError.
    virtual CompletionResult send(const ProviderRequest& request, const GenerationParams& params) = 0;
};

struct SendOptions {
    std::chrono::milliseconds timeout{std::chrono::seconds(120)};
};

// Resolves the profile's credential variable; throws ProviderError(auth) naming
// the variable when it is unset. Mock profiles need no credential.
std::string resolve_credential(const ProviderProfile& profile);

// HTTP back-end for real profiles, mock back-end for mock profiles.
std::shared_ptr<Provider> make_provider(const ProviderProfile& profile, SendOptions options = {});

// ceil(code points / 4): the fallback when a provider omits usage.
std::int64_t estimate_tokens(std::string_view text);

}  // namespace pearl::providers
