#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pearl {

class SettingsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kImagePlaceholder = "{image}";
inline constexpr std::string_view kRoughPlaceholder = "{rough_transcription}";

enum class RequestDialect { openai_chat, anthropic_messages, google_generate, mock };

std::string_view to_string(RequestDialect d);
RequestDialect dialect_from_string(std::string_view s);

// Parameters for the deterministic mock back-end. Only meaningful when the
// profile's dialect is `mock`.
struct MockConfig {
    std::filesystem::path truth_dir;  // one .txt per page, lexicographic order
    double char_sub_rate = 0.0;
    std::uint64_t seed = 0;
    int latency_ms = 0;
    bool echo_rough = false;  // return the rough transcription unchanged
    // Per-page attempt outcomes ("succeed", "fail", "recite", ...); attempts
    // past the end of a page's list succeed.
    std::map<std::size_t, std::vector<std::string>> schedule;
    bool operator==(const MockConfig&) const = default;
};

struct ProviderProfile {
    std::string name;
    std::string model_id;
    std::string endpoint;
    std::string auth_env;  // environment variable holding the API key
    double price_in = 0.0;   // USD per million input tokens
    double price_out = 0.0;  // USD per million output tokens
    RequestDialect dialect = RequestDialect::mock;
    MockConfig mock;

    void validate() const;
    bool operator==(const ProviderProfile&) const = default;
};

struct GenerationParams {
    double temperature = 0.0;
    double top_p = 1.0;
    int max_output_tokens = 4096;

    void validate() const;
    bool operator==(const GenerationParams&) const = default;
};

struct PromptTemplate {
    std::string system;
    std::string user;           // must contain {image} exactly once
    std::string answer_marker;  // e.g. "Transcription:"

    bool requires_rough() const;
    void validate() const;
    bool operator==(const PromptTemplate&) const = default;
};

struct PromptSet {
    PromptTemplate transcribe;
    PromptTemplate correct;

    void validate() const;
    bool operator==(const PromptSet&) const = default;
};

PromptSet default_prompts();
std::vector<ProviderProfile> default_profiles();

// Everything a project or a settings file carries about how to call models.
struct Settings {
    PromptSet prompts = default_prompts();
    GenerationParams params;
    std::string active_profile = "mock";
    std::string correct_profile;  // empty: same as active_profile
    std::vector<ProviderProfile> profiles = default_profiles();

    const ProviderProfile& profile(std::string_view name) const;
    bool operator==(const Settings&) const = default;
};

void to_json(nlohmann::json& j, const MockConfig& m);
void from_json(const nlohmann::json& j, MockConfig& m);
void to_json(nlohmann::json& j, const ProviderProfile& p);
void from_json(const nlohmann::json& j, ProviderProfile& p);
void to_json(nlohmann::json& j, const GenerationParams& p);
void from_json(const nlohmann::json& j, GenerationParams& p);
void to_json(nlohmann::json& j, const PromptTemplate& t);
void from_json(const nlohmann::json& j, PromptTemplate& t);
void to_json(nlohmann::json& j, const PromptSet& p);
void from_json(const nlohmann::json& j, PromptSet& p);
void to_json(nlohmann::json& j, const Settings& s);
void from_json(const nlohmann::json& j, Settings& s);

// Settings files are JSON. Missing keys fall back to defaults; profiles listed
// in the file replace built-ins of the same name and add the rest.
Settings load_settings_file(const std::filesystem::path& path);
void save_settings_file(const Settings& settings, const std::filesystem::path& path);

}  // namespace pearl
