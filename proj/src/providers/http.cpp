#include "pearl/providers/http.hpp"

#include <httplib.h>
#include <openssl/evp.h>

#include <chrono>

namespace pearl::providers {
namespace {

using nlohmann::json;

json text_part_openai(const std::string& text) { return {{"type", "text"}, {"text", text}}; }

json user_content(const ProviderProfile& profile, const ProviderRequest& request, const std::string& b64) {
    json parts = json::array();
    for (const auto& part : request.user_parts) {
        const bool image = part.kind == UserPart::Kind::image;
        switch (profile.dialect) {
            case RequestDialect::openai_chat:
                parts.push_back(image ? json{{"type", "image_url"},
                                             {"image_url", {{"url", "data:" + request.image.media_type + ";base64," + b64}}}}
                                      : text_part_openai(part.text));
                break;
            case RequestDialect::anthropic_messages:
                parts.push_back(image ? json{{"type", "image"},
                                             {"source",
                                              {{"type", "base64"}, {"media_type", request.image.media_type}, {"data", b64}}}}
                                      : text_part_openai(part.text));
                break;
            case RequestDialect::google_generate:
                parts.push_back(image ? json{{"inline_data", {{"mime_type", request.image.media_type}, {"data", b64}}}}
                                      : json{{"text", part.text}});
                break;
            case RequestDialect::mock: break;
        }
    }
    return parts;
}

StopReason openai_stop(const std::string& s) {
    if (s == "stop") return StopReason::stop;
    if (s == "length") return StopReason::length;
    if (s == "content_filter") return StopReason::content_filter;
    return StopReason::other;
}

StopReason anthropic_stop(const std::string& s) {
    if (s == "end_turn" || s == "stop_sequence") return StopReason::stop;
    if (s == "max_tokens") return StopReason::length;
    if (s == "refusal") return StopReason::content_filter;
    return StopReason::other;
}

StopReason google_stop(const std::string& s) {
    if (s == "STOP") return StopReason::stop;
    if (s == "MAX_TOKENS") return StopReason::length;
    if (s == "RECITATION") return StopReason::recitation;
    if (s == "SAFETY" || s == "BLOCKLIST" || s == "PROHIBITED_CONTENT" || s == "SPII") return StopReason::content_filter;
    return StopReason::other;
}

std::string string_or_empty(const json& j, const char* key) {
    const auto it = j.find(key);
    return it != j.end() && it->is_string() ? it->get<std::string>() : std::string();
}

// Fills usage from two integer fields if present; reports whether it did.
bool read_usage(const json& body, const char* object, const char* in, const char* out, TokenUsage& usage) {
    const auto u = body.find(object);
    if (u == body.end() || !u->is_object()) return false;
    const auto i = u->find(in);
    const auto o = u->find(out);
    if (i == u->end() || o == u->end() || !i->is_number_integer() || !o->is_number_integer()) return false;
    usage.input_tokens = std::max<std::int64_t>(0, i->get<std::int64_t>());
    usage.output_tokens = std::max<std::int64_t>(0, o->get<std::int64_t>());
    return true;
}

std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ProviderError(ErrorClass::invalid_request, "endpoint is not a URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

HttpCall encode_request(const ProviderProfile& profile, const ProviderRequest& request, const GenerationParams& params,
                        const std::string& credential) {
    params.validate();
    const std::string b64 = base64_encode(request.image.data());
    HttpCall call;
    call.headers["Content-Type"] = "application/json";
    switch (profile.dialect) {
        case RequestDialect::openai_chat:
            call.url = profile.endpoint;
            call.headers["Authorization"] = "Bearer " + credential;
            call.body = {{"model", profile.model_id},
                         {"temperature", params.temperature},
                         {"top_p", params.top_p},
                         {"max_tokens", params.max_output_tokens},
                         {"messages",
                          json::array({json{{"role", "system"}, {"content", request.system}},
                                       json{{"role", "user"}, {"content", user_content(profile, request, b64)}}})}};
            break;
        case RequestDialect::anthropic_messages:
            call.url = profile.endpoint;
            call.headers["x-api-key"] = credential;
            call.headers["anthropic-version"] = "2023-06-01";
            call.body = {{"model", profile.model_id},
                         {"temperature", params.temperature},
                         {"top_p", params.top_p},
                         {"max_tokens", params.max_output_tokens},
                         {"system", request.system},
                         {"messages", json::array({json{{"role", "user"}, {"content", user_content(profile, request, b64)}}})}};
            break;
        case RequestDialect::google_generate:
            call.url = profile.endpoint + "/models/" + profile.model_id + ":generateContent";
            call.headers["x-goog-api-key"] = credential;
            call.body = {{"systemInstruction", {{"parts", json::array({json{{"text", request.system}}})}}},
                         {"contents", json::array({json{{"role", "user"}, {"parts", user_content(profile, request, b64)}}})},
                         {"generationConfig",
                          {{"temperature", params.temperature},
                           {"topP", params.top_p},
                           {"maxOutputTokens", params.max_output_tokens}}}};
            break;
        case RequestDialect::mock:
            throw ProviderError(ErrorClass::invalid_request, "mock profiles have no wire format");
    }
    return call;
}

CompletionResult decode_response(RequestDialect dialect, const std::string& body, std::string_view prompt_text) {
    CompletionResult result;
    bool have_usage = false;
    try {
        const json j = json::parse(body);
        switch (dialect) {
            case RequestDialect::openai_chat: {
                const auto& choice = j.at("choices").at(0);
                result.text = string_or_empty(choice.at("message"), "content");
                result.stop_reason = openai_stop(string_or_empty(choice, "finish_reason"));
                have_usage = read_usage(j, "usage", "prompt_tokens", "completion_tokens", result.usage);
                break;
            }
            case RequestDialect::anthropic_messages: {
                for (const auto& part : j.at("content")) {
                    if (part.value("type", "") == "text") result.text += part.at("text").get<std::string>();
                }
                result.stop_reason = anthropic_stop(string_or_empty(j, "stop_reason"));
                have_usage = read_usage(j, "usage", "input_tokens", "output_tokens", result.usage);
                break;
            }
            case RequestDialect::google_generate: {
                const auto candidates = j.find("candidates");
                if (candidates == j.end() || candidates->empty()) {
                    if (!j.contains("promptFeedback")) {
                        throw ProviderError(ErrorClass::unparseable, "reply has no candidates", body);
                    }
                    result.stop_reason = StopReason::content_filter;
                } else {
                    const auto& c = candidates->at(0);
                    if (const auto content = c.find("content"); content != c.end() && content->contains("parts")) {
                        for (const auto& part : content->at("parts")) result.text += string_or_empty(part, "text");
                    }
                    result.stop_reason = google_stop(string_or_empty(c, "finishReason"));
                }
                have_usage = read_usage(j, "usageMetadata", "promptTokenCount", "candidatesTokenCount", result.usage);
                break;
            }
            case RequestDialect::mock:
                throw ProviderError(ErrorClass::invalid_request, "mock profiles have no wire format");
        }
    } catch (const json::exception& e) {
        throw ProviderError(ErrorClass::unparseable, std::string("unparseable provider reply: ") + e.what(), body);
    }
    if (!have_usage) {
        result.usage.input_tokens = estimate_tokens(prompt_text);
        result.usage.output_tokens = estimate_tokens(result.text);
        result.usage.estimated = true;
    }
    return result;
}

HttpProvider::HttpProvider(ProviderProfile profile, SendOptions options)
    : profile_(std::move(profile)), options_(options) {}

CompletionResult HttpProvider::send(const ProviderRequest& request, const GenerationParams& params) {
    const std::string credential = resolve_credential(profile_);
    const HttpCall call = encode_request(profile_, request, params, credential);
    const auto [origin, path] = split_url(call.url);

    httplib::Client client(origin);
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - seconds);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());

    httplib::Headers headers;
    for (const auto& [k, v] : call.headers) {
        if (k != "Content-Type") headers.emplace(k, v);
    }

    const auto start = std::chrono::steady_clock::now();
    auto response = client.Post(path, headers, call.body.dump(), "application/json");
    const auto elapsed = std::chrono::steady_clock::now() - start;

    if (!response) {
        const auto err = response.error();
        const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                               (err == httplib::Error::Read && elapsed >= options_.timeout);
        if (timed_out) throw ProviderError(ErrorClass::timeout, "request to " + origin + " timed out");
        throw ProviderError(ErrorClass::transport, "transport failure: " + httplib::to_string(err));
    }
    if (response->status == 401 || response->status == 403) {
        throw ProviderError(ErrorClass::auth, "HTTP " + std::to_string(response->status), response->body,
                            response->status);
    }
    if (response->status >= 400) {
        throw ProviderError(ErrorClass::http_status, "HTTP " + std::to_string(response->status), response->body,
                            response->status);
    }
    CompletionResult result = decode_response(profile_.dialect, response->body, request.system + request.user_text());
    result.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
    if (result.stop_reason == StopReason::recitation) {
        throw ProviderError(ErrorClass::recitation, "provider stopped with reason recitation", response->body);
    }
    return result;
}

}  // namespace pearl::providers
