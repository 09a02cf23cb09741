#pragma once

#include "pearl/providers/provider.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <string>

namespace pearl::providers {

// Wire format for one dialect, split out so it can be tested without a network.
struct HttpCall {
    std::string url;  // scheme://host[:port]/path
    std::map<std::string, std::string> headers;
    nlohmann::json body;
};

HttpCall encode_request(const ProviderProfile& profile, const ProviderRequest& request,
                        const GenerationParams& params, const std::string& credential);

// Parses a 2xx body. Throws ProviderError(unparseable) on shape mismatch.
// Missing usage is estimated from `prompt_text` and the reply.
CompletionResult decode_response(RequestDialect dialect, const std::string& body, std::string_view prompt_text);

std::string base64_encode(std::span<const std::uint8_t> bytes);

class HttpProvider : public Provider {
public:
    HttpProvider(ProviderProfile profile, SendOptions options = {});

    const ProviderProfile& profile() const override { return profile_; }
    CompletionResult send(const ProviderRequest& request, const GenerationParams& params) override;

private:
    ProviderProfile profile_;
    SendOptions options_;
};

}  // namespace pearl::providers
