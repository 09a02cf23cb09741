#include "pearl/core/project.hpp"

#include "pearl/core/pdf.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iterator>
#include <random>

namespace pearl {
namespace fs = std::filesystem;

std::string_view to_string(TranscriptOrigin o) {
    switch (o) {
        case TranscriptOrigin::llm: return "llm";
        case TranscriptOrigin::external_htr: return "external_htr";
        case TranscriptOrigin::human_edit: return "human_edit";
    }
    return "llm";
}

std::string_view to_string(TranscriptKind k) { return k == TranscriptKind::raw ? "raw" : "corrected"; }

std::string_view to_string(PageStatus s) {
    switch (s) {
        case PageStatus::empty: return "empty";
        case PageStatus::transcribed: return "transcribed";
        case PageStatus::corrected: return "corrected";
        case PageStatus::error: return "error";
    }
    return "empty";
}

TranscriptKind transcript_kind_from_string(std::string_view s) {
    if (s == "raw") return TranscriptKind::raw;
    if (s == "corrected") return TranscriptKind::corrected;
    throw ProjectError("unknown transcript kind: " + std::string(s));
}

namespace {

TranscriptOrigin origin_from_string(std::string_view s) {
    if (s == "llm") return TranscriptOrigin::llm;
    if (s == "external_htr") return TranscriptOrigin::external_htr;
    if (s == "human_edit") return TranscriptOrigin::human_edit;
    throw ProjectError("unknown transcript origin: " + std::string(s));
}

PageStatus status_from_string(std::string_view s) {
    if (s == "empty") return PageStatus::empty;
    if (s == "transcribed") return PageStatus::transcribed;
    if (s == "corrected") return PageStatus::corrected;
    if (s == "error") return PageStatus::error;
    throw ProjectError("unknown page status: " + std::string(s));
}

bool is_jpeg_name(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".jpg" || ext == ".jpeg";
}

std::string new_project_id() {
    std::random_device rd;
    std::uniform_int_distribution<std::uint64_t> dist;
    return fmt::format("{:016x}", dist(rd));
}

PageRecord& page_at(ProjectStore& project, std::size_t page) {
    if (page >= project.pages.size()) {
        throw ProjectError(fmt::format("page index {} out of range (project has {} pages)", page,
                                       project.pages.size()));
    }
    return project.pages[page];
}

std::string image_file_name(std::size_t index) { return fmt::format("images/page_{:04d}.jpg", index); }

nlohmann::json transcript_json(const std::optional<TranscriptText>& t) {
    if (!t) return nullptr;
    return {{"text", t->text}, {"origin", std::string(to_string(t->origin))}};
}

std::optional<TranscriptText> transcript_from_json(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    return TranscriptText{j.at("text").get<std::string>(), origin_from_string(j.at("origin").get<std::string>())};
}

nlohmann::json provenance_json(const JobProvenance& p) {
    return {{"action", p.action},
            {"field", std::string(to_string(p.field))},
            {"model_id", p.model_id},
            {"timestamp", p.timestamp},
            {"attempts", p.attempts},
            {"input_tokens", p.usage.input_tokens},
            {"output_tokens", p.usage.output_tokens},
            {"usage_estimated", p.usage.estimated}};
}

JobProvenance provenance_from_json(const nlohmann::json& j) {
    JobProvenance p;
    p.action = j.at("action").get<std::string>();
    p.field = transcript_kind_from_string(j.at("field").get<std::string>());
    p.model_id = j.value("model_id", std::string());
    p.timestamp = j.value("timestamp", std::string());
    p.attempts = j.value("attempts", 0);
    p.usage.input_tokens = j.value("input_tokens", std::int64_t{0});
    p.usage.output_tokens = j.value("output_tokens", std::int64_t{0});
    p.usage.estimated = j.value("usage_estimated", false);
    return p;
}

void append_page(ProjectStore& project, ImageAsset asset, ImportReport& report) {
    PageRecord record;
    record.index = project.pages.size();
    record.image = std::move(asset);
    report.added.push_back(record.index);
    project.pages.push_back(std::move(record));
}

}  // namespace

PageStatus PageRecord::derived_status() const {
    if (corrected_transcript) return PageStatus::corrected;
    if (raw_transcript) return PageStatus::transcribed;
    return PageStatus::empty;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const auto secs = std::chrono::time_point_cast<std::chrono::seconds>(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now - secs).count();
    const std::time_t t = std::chrono::system_clock::to_time_t(secs);
    std::tm tm{};
    gmtime_r(&t, &tm);
    return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}.{:03d}Z", tm.tm_year + 1900, tm.tm_mon + 1,
                       tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, ms);
}

ProjectStore ProjectStore::create() {
    ProjectStore p;
    p.project_id = new_project_id();
    p.created = utc_timestamp();
    p.modified = p.created;
    return p;
}

void ProjectStore::touch() { modified = utc_timestamp(); }

ImportReport import_images(ProjectStore& project, std::span<const fs::path> paths) {
    std::vector<fs::path> ordered(paths.begin(), paths.end());
    std::stable_sort(ordered.begin(), ordered.end(), [](const fs::path& a, const fs::path& b) {
        const auto fa = a.filename().string();
        const auto fb = b.filename().string();
        return fa != fb ? fa < fb : a.string() < b.string();
    });
    ImportReport report;
    for (const auto& path : ordered) {
        try {
            append_page(project, prepare_image(load_image_file(path)), report);
        } catch (const std::exception& e) {
            report.failures.push_back({path, e.what()});
        }
    }
    if (!report.added.empty()) project.touch();
    return report;
}

ImportReport import_image_directory(ProjectStore& project, const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ProjectError("not a directory: " + dir.string());
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_jpeg_name(entry.path())) paths.push_back(entry.path());
    }
    return import_images(project, paths);
}

ImportReport import_pdf(ProjectStore& project, const fs::path& path, int dpi) {
    if (dpi <= 0) throw ProjectError("dpi must be positive");
    PdfDocument doc = PdfDocument::open(path);
    // Render everything first so a failure part-way leaves the project untouched.
    std::vector<ImageAsset> assets;
    assets.reserve(doc.page_count());
    for (std::size_t i = 0; i < doc.page_count(); ++i) {
        try {
            assets.push_back(make_asset(fit_raster(doc.render_page(i, dpi)), path));
        } catch (const ImageError& e) {
            throw PdfError(fmt::format("page {}: {}", i + 1, e.what()));
        }
    }
    ImportReport report;
    for (auto& asset : assets) append_page(project, std::move(asset), report);
    if (!report.added.empty()) project.touch();
    return report;
}

void import_external_transcripts(ProjectStore& project,
                                 std::span<const std::pair<std::size_t, std::string>> pairs) {
    for (const auto& [index, text] : pairs) {
        if (index >= project.pages.size()) {
            throw ProjectError(fmt::format("page index {} out of range (project has {} pages)", index,
                                           project.pages.size()));
        }
    }
    const std::string now = utc_timestamp();
    for (const auto& [index, text] : pairs) {
        auto& page = project.pages[index];
        page.raw_transcript = TranscriptText{text, TranscriptOrigin::external_htr};
        page.provenance.push_back({.action = "import_external",
                                   .field = TranscriptKind::raw,
                                   .model_id = "external_htr",
                                   .timestamp = now});
        page.status = page.derived_status();
    }
    if (!pairs.empty()) project.touch();
}

void set_transcript(ProjectStore& project, std::size_t index, TranscriptKind which, TranscriptText text,
                    JobProvenance provenance) {
    auto& page = page_at(project, index);
    if (which == TranscriptKind::corrected && !page.raw_transcript) {
        throw ProjectError(fmt::format("page {} has no raw transcript to correct", index));
    }
    page.transcript(which) = std::move(text);
    provenance.field = which;
    if (provenance.timestamp.empty()) provenance.timestamp = utc_timestamp();
    page.provenance.push_back(std::move(provenance));
    page.status = page.derived_status();
    project.touch();
}

void edit_transcript(ProjectStore& project, std::size_t index, TranscriptKind which, std::string text) {
    const auto& page = page_at(project, index);
    const auto& current = page.transcript(which);
    if (current && current->text == text) return;
    set_transcript(project, index, which, {std::move(text), TranscriptOrigin::human_edit},
                   {.action = "human_edit", .model_id = "human"});
}

void mark_page_failed(ProjectStore& project, std::size_t index) {
    page_at(project, index).status = PageStatus::error;
    project.touch();
}

std::string export_text(const ProjectStore& project, TranscriptKind which, std::string_view separator) {
    const bool any = std::any_of(project.pages.begin(), project.pages.end(),
                                 [&](const PageRecord& p) { return p.transcript(which).has_value(); });
    if (!any) throw ProjectError(fmt::format("no page has a {} transcript", to_string(which)));

    std::string out;
    for (std::size_t i = 0; i < project.pages.size(); ++i) {
        if (i > 0) {
            std::string sep(separator);
            const std::string number = std::to_string(i + 1);
            for (auto pos = sep.find("{n}"); pos != std::string::npos; pos = sep.find("{n}", pos + number.size())) {
                sep.replace(pos, 3, number);
            }
            out += sep;
        }
        const auto& t = project.pages[i].transcript(which);
        out += t ? t->text : fmt::format("[[PAGE {}: NO TRANSCRIPT]]", i + 1);
    }
    return out;
}

std::size_t find_replace(ProjectStore& project, TranscriptKind which, std::string_view find,
                         std::string_view replace, ReplaceScope scope, std::size_t page) {
    if (find.empty()) throw ProjectError("find string must not be empty");
    std::size_t first = 0;
    std::size_t last = project.pages.size();
    if (scope == ReplaceScope::page) {
        page_at(project, page);
        first = page;
        last = page + 1;
    }
    std::size_t total = 0;
    for (std::size_t i = first; i < last; ++i) {
        const auto& t = project.pages[i].transcript(which);
        if (!t) continue;
        std::string text = t->text;
        std::size_t count = 0;
        for (auto pos = text.find(find); pos != std::string::npos; pos = text.find(find, pos + replace.size())) {
            text.replace(pos, find.size(), replace);
            ++count;
        }
        total += count;
        if (count > 0 && text != t->text) edit_transcript(project, i, which, std::move(text));
    }
    return total;
}

nlohmann::json manifest_json(const ProjectStore& project) {
    nlohmann::json pages = nlohmann::json::array();
    for (const auto& page : project.pages) {
        nlohmann::json prov = nlohmann::json::array();
        for (const auto& p : page.provenance) prov.push_back(provenance_json(p));
        pages.push_back({{"index", page.index},
                         {"image_file", image_file_name(page.index)},
                         {"width", page.image.width},
                         {"height", page.image.height},
                         {"source", page.image.source_path.generic_string()},
                         {"raw", transcript_json(page.raw_transcript)},
                         {"corrected", transcript_json(page.corrected_transcript)},
                         {"status", std::string(to_string(page.status))},
                         {"provenance", std::move(prov)}});
    }
    return {{"version", 1},
            {"project_id", project.project_id},
            {"created", project.created},
            {"modified", project.modified},
            {"pages", std::move(pages)},
            {"settings", project.settings}};
}

void save_project(const ProjectStore& project, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir / "images", ec);
    if (ec) throw ProjectError("cannot create project directory " + dir.string() + ": " + ec.message());
    for (const auto& page : project.pages) {
        const fs::path target = dir / image_file_name(page.index);
        std::ofstream out(target, std::ios::binary | std::ios::trunc);
        const auto data = page.image.data();
        out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
        if (!out) throw ProjectError("cannot write " + target.string());
    }
    // Write-then-rename keeps the previous manifest intact if we die mid-write.
    const fs::path tmp = dir / "project.json.tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << manifest_json(project).dump(2) << '\n';
        if (!out) throw ProjectError("cannot write " + tmp.string());
    }
    fs::rename(tmp, dir / "project.json", ec);
    if (ec) throw ProjectError("cannot replace manifest: " + ec.message());
}

ProjectStore load_project(const fs::path& dir) {
    std::ifstream in(dir / "project.json", std::ios::binary);
    if (!in) throw ProjectError("no project.json in " + dir.string());
    ProjectStore project;
    try {
        const auto j = nlohmann::json::parse(in);
        if (j.value("version", 0) != 1) throw ProjectError("unsupported manifest version");
        project.project_id = j.at("project_id").get<std::string>();
        project.created = j.value("created", std::string());
        project.modified = j.value("modified", std::string());
        if (j.contains("settings")) project.settings = j.at("settings").get<Settings>();
        for (const auto& pj : j.at("pages")) {
            PageRecord page;
            page.index = pj.at("index").get<std::size_t>();
            if (page.index != project.pages.size()) throw ProjectError("page indices are not contiguous");
            const fs::path image_path = dir / pj.at("image_file").get<std::string>();
            std::ifstream img(image_path, std::ios::binary);
            if (!img) throw ProjectError("missing image " + image_path.string());
            std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(img)), std::istreambuf_iterator<char>());
            page.image.source_path = pj.value("source", std::string());
            page.image.width = pj.at("width").get<int>();
            page.image.height = pj.at("height").get<int>();
            page.image.bytes = std::make_shared<const std::vector<std::uint8_t>>(std::move(bytes));
            page.raw_transcript = transcript_from_json(pj.at("raw"));
            page.corrected_transcript = transcript_from_json(pj.at("corrected"));
            page.status = status_from_string(pj.at("status").get<std::string>());
            for (const auto& p : pj.at("provenance")) page.provenance.push_back(provenance_from_json(p));
            project.pages.push_back(std::move(page));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ProjectError("malformed project.json: " + std::string(e.what()));
    }
    return project;
}

}  // namespace pearl
