#include "pearl/core/settings.hpp"

#include <fstream>
#include <sstream>

namespace pearl {
namespace {

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = haystack.find(needle); pos != std::string_view::npos; pos = haystack.find(needle, pos + needle.size())) {
        ++n;
    }
    return n;
}

}  // namespace

std::string_view to_string(RequestDialect d) {
    switch (d) {
        case RequestDialect::openai_chat: return "openai_chat";
        case RequestDialect::anthropic_messages: return "anthropic_messages";
        case RequestDialect::google_generate: return "google_generate";
        case RequestDialect::mock: return "mock";
    }
    return "mock";
}

RequestDialect dialect_from_string(std::string_view s) {
    if (s == "openai_chat") return RequestDialect::openai_chat;
    if (s == "anthropic_messages") return RequestDialect::anthropic_messages;
    if (s == "google_generate") return RequestDialect::google_generate;
    if (s == "mock") return RequestDialect::mock;
    throw SettingsError("unknown request dialect: " + std::string(s));
}

void ProviderProfile::validate() const {
    if (name.empty()) throw SettingsError("profile name must not be empty");
    if (model_id.empty()) throw SettingsError("profile '" + name + "': model_id must not be empty");
    if (price_in < 0.0 || price_out < 0.0) throw SettingsError("profile '" + name + "': prices must be >= 0");
    if (dialect != RequestDialect::mock && endpoint.empty()) {
        throw SettingsError("profile '" + name + "': endpoint required");
    }
    if (dialect == RequestDialect::mock && (mock.char_sub_rate < 0.0 || mock.char_sub_rate > 1.0)) {
        throw SettingsError("profile '" + name + "': char_sub_rate must lie in [0,1]");
    }
}

void GenerationParams::validate() const {
    if (!(temperature >= 0.0 && temperature <= 2.0)) throw SettingsError("temperature must lie in [0,2]");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw SettingsError("top_p must lie in (0,1]");
    if (max_output_tokens <= 0) throw SettingsError("max_output_tokens must be positive");
}

bool PromptTemplate::requires_rough() const {
    return user.find(kRoughPlaceholder) != std::string::npos;
}

void PromptTemplate::validate() const {
    if (answer_marker.empty()) throw SettingsError("prompt answer_marker must not be empty");
    if (count_occurrences(user, kImagePlaceholder) != 1) {
        throw SettingsError("prompt user message must contain {image} exactly once");
    }
    if (count_occurrences(user, kRoughPlaceholder) > 1) {
        throw SettingsError("prompt user message contains {rough_transcription} more than once");
    }
}

void PromptSet::validate() const {
    transcribe.validate();
    correct.validate();
    if (!correct.requires_rough()) {
        throw SettingsError("correction prompt must reference {rough_transcription}");
    }
}

PromptSet default_prompts() {
    PromptSet set;
    set.transcribe.system =
        "Your task is to accurately transcribe handwritten historical documents, minimizing the CER and WER. "
        "Work character by character, word by word, line by line, transcribing the text exactly as it appears "
        "on the page. To maintain the authenticity of the historical text, retain spelling errors, grammar, "
        "syntax, and punctuation as well as line breaks. Transcribe all the text on the page including headers, "
        "footers, marginalia, insertions, page numbers, etc. If these are present, insert them where indicated "
        "by the author (as applicable). In your response, write: \"Transcription:\" followed only by your "
        "accurate transcription";
    set.transcribe.user =
        "Carefully transcribe this page from an 18th/19th century document. In your response, write: "
        "\"Transcription:\" followed only by your accurate transcription.\n\n{image}";
    set.transcribe.answer_marker = "Transcription:";

    set.correct.system =
        "Your task is to compare handwritten pages of text with corresponding draft transcriptions, correcting "
        "the transcription to produce an accurate, publishable transcript. Be sure that the spelling, syntax, "
        "punctuation, and line breaks in the transcription match those on the handwritten page to preserve the "
        "historical integrity of the document. Numbers also easily misread, so pay close attention to digits. "
        "You must also ensure that the transcription begins and ends in the same place as the handwritten "
        "document. Include any catchwords at the bottom of the page. In your response write \"Corrected "
        "Transcript:\" followed by your corrected transcription.";
    set.correct.user =
        "Your task is to use the handwritten page image to correct the following transcription, retaining the "
        "spelling, syntax, punctuation, line breaks, catchwords, etc of the original.\n\n"
        "In your response write \"Corrected Transcript:\" followed by your corrected transcription.\n\n"
        "{rough_transcription}\n\n{image}";
    set.correct.answer_marker = "Corrected Transcript:";
    return set;
}

std::vector<ProviderProfile> default_profiles() {
    std::vector<ProviderProfile> out;
    out.push_back({.name = "gpt-4o",
                   .model_id = "gpt-4o-2024-08-06",
                   .endpoint = "https://api.openai.com/v1/chat/completions",
                   .auth_env = "PEARL_OPENAI_KEY",
                   .price_in = 2.50,
                   .price_out = 10.00,
                   .dialect = RequestDialect::openai_chat});
    out.push_back({.name = "claude-sonnet-3.5",
                   .model_id = "claude-3-5-sonnet-20241022",
                   .endpoint = "https://api.anthropic.com/v1/messages",
                   .auth_env = "PEARL_ANTHROPIC_KEY",
                   .price_in = 3.00,
                   .price_out = 15.00,
                   .dialect = RequestDialect::anthropic_messages});
    out.push_back({.name = "gemini-1.5-pro",
                   .model_id = "gemini-1.5-pro-002",
                   .endpoint = "https://generativelanguage.googleapis.com/v1beta",
                   .auth_env = "PEARL_GOOGLE_KEY",
                   .price_in = 3.50,
                   .price_out = 10.50,
                   .dialect = RequestDialect::google_generate});
    out.push_back({.name = "mock", .model_id = "mock-transcriber", .dialect = RequestDialect::mock});
    return out;
}

const ProviderProfile& Settings::profile(std::string_view name) const {
    for (const auto& p : profiles) {
        if (p.name == name) return p;
    }
    throw SettingsError("unknown provider profile: " + std::string(name));
}

void to_json(nlohmann::json& j, const MockConfig& m) {
    j = {{"truth_dir", m.truth_dir.generic_string()},
         {"char_sub_rate", m.char_sub_rate},
         {"seed", m.seed},
         {"latency_ms", m.latency_ms},
         {"echo_rough", m.echo_rough}};
    if (!m.schedule.empty()) {
        nlohmann::json schedule = nlohmann::json::object();
        for (const auto& [page, outcomes] : m.schedule) schedule[std::to_string(page)] = outcomes;
        j["schedule"] = std::move(schedule);
    }
}

void from_json(const nlohmann::json& j, MockConfig& m) {
    m = MockConfig{};
    m.truth_dir = j.value("truth_dir", std::string());
    m.char_sub_rate = j.value("char_sub_rate", 0.0);
    m.seed = j.value("seed", std::uint64_t{0});
    m.latency_ms = j.value("latency_ms", 0);
    m.echo_rough = j.value("echo_rough", false);
    if (j.contains("schedule")) {
        for (const auto& [page, outcomes] : j.at("schedule").items()) {
            m.schedule[std::stoul(page)] = outcomes.get<std::vector<std::string>>();
        }
    }
}

void to_json(nlohmann::json& j, const ProviderProfile& p) {
    j = {{"name", p.name},
         {"model_id", p.model_id},
         {"endpoint", p.endpoint},
         {"auth_env", p.auth_env},
         {"price_in", p.price_in},
         {"price_out", p.price_out},
         {"request_dialect", std::string(to_string(p.dialect))}};
    if (p.dialect == RequestDialect::mock) j["mock"] = p.mock;
}

void from_json(const nlohmann::json& j, ProviderProfile& p) {
    p = ProviderProfile{};
    p.name = j.at("name").get<std::string>();
    p.model_id = j.at("model_id").get<std::string>();
    p.endpoint = j.value("endpoint", std::string());
    p.auth_env = j.value("auth_env", std::string());
    p.price_in = j.value("price_in", 0.0);
    p.price_out = j.value("price_out", 0.0);
    p.dialect = dialect_from_string(j.value("request_dialect", std::string("mock")));
    if (j.contains("mock")) p.mock = j.at("mock").get<MockConfig>();
    p.validate();
}

void to_json(nlohmann::json& j, const GenerationParams& p) {
    j = {{"temperature", p.temperature}, {"top_p", p.top_p}, {"max_output_tokens", p.max_output_tokens}};
}

void from_json(const nlohmann::json& j, GenerationParams& p) {
    p = GenerationParams{};
    p.temperature = j.value("temperature", p.temperature);
    p.top_p = j.value("top_p", p.top_p);
    p.max_output_tokens = j.value("max_output_tokens", p.max_output_tokens);
    p.validate();
}

void to_json(nlohmann::json& j, const PromptTemplate& t) {
    j = {{"system", t.system}, {"user", t.user}, {"answer_marker", t.answer_marker}};
}

void from_json(const nlohmann::json& j, PromptTemplate& t) {
    t.system = j.at("system").get<std::string>();
    t.user = j.at("user").get<std::string>();
    t.answer_marker = j.at("answer_marker").get<std::string>();
    t.validate();
}

void to_json(nlohmann::json& j, const PromptSet& p) {
    j = {{"transcribe", p.transcribe}, {"correct", p.correct}};
}

void from_json(const nlohmann::json& j, PromptSet& p) {
    PromptSet defaults = default_prompts();
    p.transcribe = j.contains("transcribe") ? j.at("transcribe").get<PromptTemplate>() : defaults.transcribe;
    p.correct = j.contains("correct") ? j.at("correct").get<PromptTemplate>() : defaults.correct;
    p.validate();
}

void to_json(nlohmann::json& j, const Settings& s) {
    j = {{"version", 1},
         {"prompts", s.prompts},
         {"params", s.params},
         {"active_profile", s.active_profile},
         {"correct_profile", s.correct_profile},
         {"profiles", s.profiles}};
}

void from_json(const nlohmann::json& j, Settings& s) {
    s = Settings{};
    if (j.contains("prompts")) s.prompts = j.at("prompts").get<PromptSet>();
    if (j.contains("params")) s.params = j.at("params").get<GenerationParams>();
    s.active_profile = j.value("active_profile", s.active_profile);
    s.correct_profile = j.value("correct_profile", s.correct_profile);
    if (j.contains("profiles")) {
        for (const auto& entry : j.at("profiles")) {
            auto profile = entry.get<ProviderProfile>();
            bool replaced = false;
            for (auto& existing : s.profiles) {
                if (existing.name == profile.name) {
                    existing = profile;
                    replaced = true;
                }
            }
            if (!replaced) s.profiles.push_back(std::move(profile));
        }
    }
    s.profile(s.active_profile);
    if (!s.correct_profile.empty()) s.profile(s.correct_profile);
}

Settings load_settings_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SettingsError("cannot open settings file " + path.string());
    try {
        return nlohmann::json::parse(in).get<Settings>();
    } catch (const nlohmann::json::exception& e) {
        throw SettingsError("invalid settings file " + path.string() + ": " + e.what());
    }
}

void save_settings_file(const Settings& settings, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw SettingsError("cannot write settings file " + path.string());
    out << nlohmann::json(settings).dump(2) << '\n';
}

}  // namespace pearl
