#include "pearl/providers/provider.hpp"

#include "pearl/providers/http.hpp"
#include "pearl/providers/mock.hpp"

#include <cstdlib>

namespace pearl::providers {

std::string_view to_string(StopReason r) {
    switch (r) {
        case StopReason::stop: return "stop";
        case StopReason::length: return "length";
        case StopReason::recitation: return "recitation";
        case StopReason::content_filter: return "content_filter";
        case StopReason::other: return "other";
    }
    return "other";
}

std::string_view to_string(ErrorClass c) {
    switch (c) {
        case ErrorClass::transport: return "transport";
        case ErrorClass::timeout: return "timeout";
        case ErrorClass::http_status: return "http_status";
        case ErrorClass::auth: return "auth";
        case ErrorClass::unparseable: return "unparseable";
        case ErrorClass::recitation: return "recitation";
        case ErrorClass::empty_completion: return "empty_completion";
        case ErrorClass::invalid_request: return "invalid_request";
    }
    return "transport";
}

std::string ProviderRequest::user_text() const {
    std::string out;
    for (const auto& part : user_parts) {
        if (part.kind != UserPart::Kind::text) continue;
        if (!out.empty()) out += "\n\n";
        out += part.text;
    }
    return out;
}

std::string resolve_credential(const ProviderProfile& profile) {
    if (profile.dialect == RequestDialect::mock) return {};
    if (profile.auth_env.empty()) {
        throw ProviderError(ErrorClass::auth, "profile '" + profile.name + "' names no credential variable");
    }
    const char* value = std::getenv(profile.auth_env.c_str());
    if (!value || !*value) {
        throw ProviderError(ErrorClass::auth, "credential environment variable " + profile.auth_env + " is not set");
    }
    return value;
}

std::shared_ptr<Provider> make_provider(const ProviderProfile& profile, SendOptions options) {
    profile.validate();
    if (profile.dialect == RequestDialect::mock) {
        return std::make_shared<MockProvider>(profile, behavior_from_profile(profile));
    }
    return std::make_shared<HttpProvider>(profile, options);
}

std::int64_t estimate_tokens(std::string_view text) {
    std::int64_t code_points = 0;
    for (char c : text) {
        if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++code_points;
    }
    return (code_points + 3) / 4;
}

}  // namespace pearl::providers
