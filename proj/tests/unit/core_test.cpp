#include "pearl/core/image.hpp"
#include "pearl/core/pdf.hpp"
#include "pearl/core/project.hpp"
#include "pearl/core/settings.hpp"

#include "../support/fixtures.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

namespace pearl {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Independent statement of the rule: scale = 2048 / longest side, the other
// side rounded half-up with exact integer arithmetic, floor 1.
Dimensions expected_fit(Dimensions d) {
    const long longest = std::max(d.width, d.height);
    if (longest <= kMaxImageSide) return d;
    auto scale = [&](long side) {
        const long num = side * kMaxImageSide;
        long q = num / longest;
        if ((num % longest) * 2 >= longest) ++q;
        return static_cast<int>(std::max(1L, q));
    };
    return d.width >= d.height ? Dimensions{kMaxImageSide, scale(d.height)} : Dimensions{scale(d.width), kMaxImageSide};
}

// ---- resize ------------------------------------------------------------------

TEST(Resize, WorkedExamples) {
    EXPECT_EQ(fitted_dimensions({4000, 3000}), (Dimensions{2048, 1536}));
    EXPECT_EQ(fitted_dimensions({1024, 768}), (Dimensions{1024, 768}));
    EXPECT_EQ(fitted_dimensions({5000, 100}), (Dimensions{2048, 41}));
    EXPECT_EQ(fitted_dimensions({3400, 4400}), (Dimensions{1583, 2048}));
    EXPECT_EQ(fitted_dimensions({2048, 2048}), (Dimensions{2048, 2048}));
    EXPECT_EQ(fitted_dimensions({100000, 1}), (Dimensions{2048, 1}));
}

TEST(Resize, ZeroDimensionRejected) {
    EXPECT_THROW(fitted_dimensions({0, 10}), ImageError);
}

TEST(Resize, RandomDimensionsMatchIndependentRule) {
    std::mt19937_64 rng(2048);
    std::uniform_int_distribution<int> side(1, 20000);
    for (int i = 0; i < 20000; ++i) {
        const Dimensions in{side(rng), side(rng)};
        const Dimensions out = fitted_dimensions(in);
        ASSERT_EQ(out, expected_fit(in)) << in.width << "x" << in.height;
        ASSERT_LE(std::max(out.width, out.height), kMaxImageSide);
        ASSERT_LE(out.width, in.width);
        ASSERT_LE(out.height, in.height);
        ASSERT_EQ(fitted_dimensions(out), out);
        // Aspect within one pixel on the scaled side.
        if (in.width >= in.height) {
            ASSERT_LE(std::abs(out.height - static_cast<double>(in.height) * out.width / in.width), 1.0);
        } else {
            ASSERT_LE(std::abs(out.width - static_cast<double>(in.width) * out.height / in.height), 1.0);
        }
    }
}

TEST(Resize, PrepareImageShrinksAndIsIdempotent) {
    const auto big = make_asset(testing::test_raster(4000, 3000), "big.jpg");
    const auto once = prepare_image(big);
    EXPECT_EQ(once.width, 2048);
    EXPECT_EQ(once.height, 1536);
    EXPECT_EQ(probe_jpeg(once.data()), (Dimensions{2048, 1536}));
    const auto twice = prepare_image(once);
    EXPECT_EQ(twice.bytes, once.bytes);  // same payload, untouched
    const auto small = make_asset(testing::test_raster(1024, 768));
    EXPECT_EQ(prepare_image(small).bytes, small.bytes);
}

// ---- JPEG import -------------------------------------------------------------

TEST(ImportImages, OrderedByFilename) {
    TempDir dir;
    testing::write_bytes(dir / "p2.jpg", testing::test_jpeg(30, 20, 2));
    testing::write_bytes(dir / "p1.jpg", testing::test_jpeg(31, 20, 1));
    testing::write_bytes(dir / "p3.jpeg", testing::test_jpeg(32, 20, 3));
    testing::write_text(dir / "notes.txt", "not an image");
    auto project = ProjectStore::create();
    const auto report = import_image_directory(project, dir.path());
    ASSERT_EQ(project.pages.size(), 3u);
    EXPECT_TRUE(report.failures.empty());
    EXPECT_EQ(project.pages[0].image.width, 31);
    EXPECT_EQ(project.pages[1].image.width, 30);
    EXPECT_EQ(project.pages[2].image.width, 32);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(project.pages[i].index, i);
        EXPECT_EQ(project.pages[i].status, PageStatus::empty);
    }
}

TEST(ImportImages, EmptyListIsFine) {
    auto project = ProjectStore::create();
    const auto report = import_images(project, {});
    EXPECT_TRUE(project.pages.empty());
    EXPECT_TRUE(report.failures.empty());
}

TEST(ImportImages, TruncatedFileIsReportedAndOthersContinue) {
    TempDir dir;
    testing::write_bytes(dir / "p1.jpg", testing::test_jpeg(40, 30));
    auto truncated = testing::test_jpeg(200, 150);
    truncated.resize(truncated.size() / 2);
    testing::write_bytes(dir / "corrupt.jpg", truncated);
    testing::write_text(dir / "garbage.jpg", "definitely not jpeg");
    auto project = ProjectStore::create();
    const std::vector<fs::path> paths = {dir / "p1.jpg", dir / "corrupt.jpg", dir / "garbage.jpg"};
    const auto report = import_images(project, paths);
    EXPECT_EQ(project.pages.size(), 1u);
    EXPECT_EQ(report.failures.size(), 2u);
    EXPECT_THROW(decode_jpeg(truncated), ImageError);
}

TEST(ImportImages, OversizedImageIsDownscaled) {
    TempDir dir;
    testing::write_bytes(dir / "wide.jpg", testing::test_jpeg(5000, 100));
    auto project = ProjectStore::create();
    const std::vector<fs::path> paths = {dir / "wide.jpg"};
    import_images(project, paths);
    ASSERT_EQ(project.pages.size(), 1u);
    EXPECT_EQ(project.pages[0].image.width, 2048);
    EXPECT_EQ(project.pages[0].image.height, 41);
}

// ---- PDF import --------------------------------------------------------------

TEST(ImportPdf, ThreePagesInOrder) {
    TempDir dir;
    std::vector<testing::PdfPageSpec> pages;
    for (int i = 0; i < 3; ++i) {
        const int w = 60 + i * 10;
        pages.push_back({72.0 * w / 150, 72.0 * 50 / 150, testing::test_jpeg(w, 50, static_cast<std::uint8_t>(i)), w, 50});
    }
    testing::write_bytes(dir / "doc.pdf", testing::build_pdf(pages));
    auto project = ProjectStore::create();
    const auto report = import_pdf(project, dir / "doc.pdf", 150);
    ASSERT_EQ(project.pages.size(), 3u);
    EXPECT_EQ(report.added.size(), 3u);
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(project.pages[i].image.width, 60 + i * 10);
        EXPECT_EQ(project.pages[i].image.height, 50);
    }
}

TEST(ImportPdf, ZeroPages) {
    TempDir dir;
    testing::write_bytes(dir / "empty.pdf", testing::build_pdf({}));
    auto project = ProjectStore::create();
    const auto report = import_pdf(project, dir / "empty.pdf");
    EXPECT_TRUE(project.pages.empty());
    EXPECT_TRUE(report.added.empty());
}

TEST(ImportPdf, LargePageIsFittedTo2048) {
    TempDir dir;
    // 1632 x 2112 pt at 150 dpi renders to 3400 x 4400 px.
    testing::PdfPageSpec page{1632, 2112, testing::test_jpeg(340, 440), 340, 440};
    testing::write_bytes(dir / "big.pdf", testing::build_pdf({page}));
    const auto doc = PdfDocument::open(dir / "big.pdf");
    const auto raster = doc.render_page(0, 150);
    EXPECT_EQ(raster.width, 3400);
    EXPECT_EQ(raster.height, 4400);
    auto project = ProjectStore::create();
    import_pdf(project, dir / "big.pdf", 150);
    ASSERT_EQ(project.pages.size(), 1u);
    EXPECT_EQ(project.pages[0].image.width, 1583);
    EXPECT_EQ(project.pages[0].image.height, 2048);
}

TEST(ImportPdf, PageWithoutImageRendersWhite) {
    TempDir dir;
    testing::write_bytes(dir / "blank.pdf", testing::build_pdf({testing::PdfPageSpec{72, 36}}));
    const auto raster = PdfDocument::open(dir / "blank.pdf").render_page(0, 100);
    EXPECT_EQ(raster.width, 100);
    EXPECT_EQ(raster.height, 50);
    EXPECT_TRUE(std::all_of(raster.pixels.begin(), raster.pixels.end(), [](std::uint8_t v) { return v == 255; }));
}

TEST(ImportPdf, MalformedLeavesProjectUnchanged) {
    TempDir dir;
    testing::write_text(dir / "bad.pdf", "this is not a pdf at all");
    auto bytes = testing::build_pdf({testing::PdfPageSpec{72, 72, testing::test_jpeg(20, 20), 20, 20}});
    bytes.resize(bytes.size() / 3);  // cut through the page tree
    testing::write_bytes(dir / "cut.pdf", bytes);
    auto project = ProjectStore::create();
    testing::write_bytes(dir / "ok.jpg", testing::test_jpeg(10, 10));
    const std::vector<fs::path> paths = {dir / "ok.jpg"};
    import_images(project, paths);
    const auto before = manifest_json(project);
    EXPECT_THROW(import_pdf(project, dir / "bad.pdf"), PdfError);
    EXPECT_THROW(import_pdf(project, dir / "cut.pdf"), std::exception);
    EXPECT_EQ(manifest_json(project), before);
}

// ---- transcripts -------------------------------------------------------------

ProjectStore blank_project(std::size_t n) {
    auto p = ProjectStore::create();
    for (std::size_t i = 0; i < n; ++i) {
        PageRecord page;
        page.index = i;
        page.image = testing::test_asset(8, 8);
        p.pages.push_back(page);
    }
    return p;
}

TEST(ExternalImport, SetsRawAtomically) {
    auto p = blank_project(3);
    const std::vector<std::pair<std::size_t, std::string>> ok = {{0, "My dear Sir"}};
    import_external_transcripts(p, ok);
    EXPECT_EQ(p.pages[0].raw_transcript->text, "My dear Sir");
    EXPECT_EQ(p.pages[0].raw_transcript->origin, TranscriptOrigin::external_htr);
    EXPECT_EQ(p.pages[0].status, PageStatus::transcribed);

    const std::vector<std::pair<std::size_t, std::string>> bad = {{1, "x"}, {99, "y"}};
    EXPECT_THROW(import_external_transcripts(p, bad), ProjectError);
    EXPECT_FALSE(p.pages[1].raw_transcript);

    const std::vector<std::pair<std::size_t, std::string>> again = {{0, "My dear Sir,"}};
    import_external_transcripts(p, again);
    EXPECT_EQ(p.pages[0].raw_transcript->text, "My dear Sir,");
    EXPECT_EQ(p.pages[0].provenance.size(), 2u);
}

TEST(Transcripts, CorrectedNeedsRaw) {
    auto p = blank_project(1);
    EXPECT_THROW(set_transcript(p, 0, TranscriptKind::corrected, {"x"}, {.action = "correct"}), ProjectError);
    set_transcript(p, 0, TranscriptKind::raw, {"r"}, {.action = "transcribe"});
    set_transcript(p, 0, TranscriptKind::corrected, {"c"}, {.action = "correct"});
    EXPECT_EQ(p.pages[0].status, PageStatus::corrected);
}

TEST(Transcripts, TextStoredVerbatim) {
    auto p = blank_project(1);
    const std::string text = "  Employ'd,\n\tSIR  \n";
    set_transcript(p, 0, TranscriptKind::raw, {text}, {.action = "transcribe"});
    EXPECT_EQ(p.pages[0].raw_transcript->text, text);
}

TEST(Transcripts, HumanEditRecordsProvenanceOncePerChange) {
    auto p = blank_project(1);
    set_transcript(p, 0, TranscriptKind::raw, {"a"}, {.action = "transcribe"});
    edit_transcript(p, 0, TranscriptKind::raw, "b");
    edit_transcript(p, 0, TranscriptKind::raw, "b");
    EXPECT_EQ(p.pages[0].provenance.size(), 2u);
    EXPECT_EQ(p.pages[0].provenance.back().action, "human_edit");
    EXPECT_EQ(p.pages[0].raw_transcript->origin, TranscriptOrigin::human_edit);
}

TEST(Export, ConcatenatesWithSeparator) {
    auto p = blank_project(2);
    set_transcript(p, 0, TranscriptKind::raw, {"A"}, {});
    set_transcript(p, 1, TranscriptKind::raw, {"B"}, {});
    EXPECT_EQ(export_text(p, TranscriptKind::raw, "\n\n---\n\n"), "A\n\n---\n\nB");
    EXPECT_EQ(export_text(p, TranscriptKind::raw), "A\n\n----- page 2 -----\n\nB");
}

TEST(Export, PlaceholderForMissingPage) {
    auto p = blank_project(2);
    set_transcript(p, 0, TranscriptKind::raw, {"A"}, {});
    set_transcript(p, 1, TranscriptKind::raw, {"B"}, {});
    set_transcript(p, 0, TranscriptKind::corrected, {"A2"}, {});
    EXPECT_EQ(export_text(p, TranscriptKind::corrected, "|"), "A2|[[PAGE 2: NO TRANSCRIPT]]");
}

TEST(Export, SinglePageAndNoTranscript) {
    auto p = blank_project(1);
    EXPECT_THROW(export_text(p, TranscriptKind::raw), ProjectError);
    set_transcript(p, 0, TranscriptKind::raw, {"only"}, {});
    EXPECT_EQ(export_text(p, TranscriptKind::raw), "only");
}

TEST(Export, KPagesGiveKMinusOneSeparators) {
    for (std::size_t k = 1; k <= 6; ++k) {
        auto p = blank_project(k);
        for (std::size_t i = 0; i < k; ++i) set_transcript(p, i, TranscriptKind::raw, {"t"}, {});
        const auto out = export_text(p, TranscriptKind::raw, "#");
        EXPECT_EQ(static_cast<std::size_t>(std::count(out.begin(), out.end(), '#')), k - 1);
    }
}

TEST(FindReplace, CountsAcrossPages) {
    auto p = blank_project(3);
    set_transcript(p, 0, TranscriptKind::raw, {"teh cat and teh dog"}, {});
    set_transcript(p, 1, TranscriptKind::raw, {"nothing here"}, {});
    set_transcript(p, 2, TranscriptKind::raw, {"teh end"}, {});
    EXPECT_EQ(find_replace(p, TranscriptKind::raw, "teh", "the", ReplaceScope::all), 3u);
    EXPECT_EQ(p.pages[0].raw_transcript->text, "the cat and the dog");
    EXPECT_EQ(p.pages[0].provenance.back().action, "human_edit");
    EXPECT_EQ(p.pages[1].provenance.size(), 1u);
}

TEST(FindReplace, LiteralAndScoped) {
    auto p = blank_project(2);
    set_transcript(p, 0, TranscriptKind::raw, {"a.c a.c abc"}, {});
    set_transcript(p, 1, TranscriptKind::raw, {"a.c"}, {});
    EXPECT_EQ(find_replace(p, TranscriptKind::raw, "a.c", "X", ReplaceScope::page, 1), 1u);
    EXPECT_EQ(p.pages[0].raw_transcript->text, "a.c a.c abc");
    EXPECT_EQ(p.pages[1].raw_transcript->text, "X");
}

TEST(FindReplace, EmptyFindAndIdentity) {
    auto p = blank_project(1);
    set_transcript(p, 0, TranscriptKind::raw, {"aaa"}, {});
    EXPECT_THROW(find_replace(p, TranscriptKind::raw, "", "x", ReplaceScope::all), ProjectError);
    EXPECT_EQ(find_replace(p, TranscriptKind::raw, "a", "a", ReplaceScope::all), 3u);
    EXPECT_EQ(p.pages[0].raw_transcript->text, "aaa");
    EXPECT_EQ(p.pages[0].provenance.size(), 1u);
    EXPECT_EQ(find_replace(p, TranscriptKind::raw, "aa", "b", ReplaceScope::all), 1u);
    EXPECT_EQ(p.pages[0].raw_transcript->text, "ba");
}

// ---- persistence -------------------------------------------------------------

TEST(Persistence, SaveLoadSaveIsByteIdentical) {
    TempDir dir;
    auto p = blank_project(3);
    set_transcript(p, 0, TranscriptKind::raw, {"Employ'd \xE2\x80\x94 caf\xC3\xA9"}, {.action = "transcribe", .model_id = "m", .attempts = 2, .usage = {10, 3, true}});
    set_transcript(p, 0, TranscriptKind::corrected, {"x"}, {.action = "correct", .model_id = "n"});
    mark_page_failed(p, 1);
    p.settings.params.temperature = 0.5;
    save_project(p, dir / "a");
    const auto loaded = load_project(dir / "a");
    save_project(loaded, dir / "b");
    EXPECT_EQ(slurp(dir / "a" / "project.json"), slurp(dir / "b" / "project.json"));
    EXPECT_EQ(slurp(dir / "a" / "images" / "page_0002.jpg"), slurp(dir / "b" / "images" / "page_0002.jpg"));
    EXPECT_EQ(loaded.pages[0].raw_transcript, p.pages[0].raw_transcript);
    EXPECT_EQ(loaded.pages[0].provenance, p.pages[0].provenance);
    EXPECT_EQ(loaded.pages[1].status, PageStatus::error);
    EXPECT_EQ(loaded.settings, p.settings);
    EXPECT_EQ(*loaded.pages[2].image.bytes, *p.pages[2].image.bytes);
}

TEST(Persistence, MissingOrBrokenManifest) {
    TempDir dir;
    EXPECT_THROW(load_project(dir.path()), ProjectError);
    testing::write_text(dir / "project.json", "{ nope");
    EXPECT_THROW(load_project(dir.path()), ProjectError);
}

TEST(Settings, FileRoundTripAndOverrides) {
    TempDir dir;
    Settings s;
    s.params.top_p = 0.9;
    s.active_profile = "gpt-4o";
    s.profiles.back().mock.char_sub_rate = 0.05;
    s.profiles.back().mock.schedule[2] = {"fail", "succeed"};
    save_settings_file(s, dir / "settings.json");
    EXPECT_EQ(load_settings_file(dir / "settings.json"), s);

    testing::write_text(dir / "partial.json",
                        R"({"active_profile":"local","profiles":[{"name":"local","model_id":"m","request_dialect":"mock"}]})");
    const auto partial = load_settings_file(dir / "partial.json");
    EXPECT_EQ(partial.prompts, default_prompts());
    EXPECT_EQ(partial.profiles.size(), default_profiles().size() + 1);
    EXPECT_EQ(partial.profile("local").model_id, "m");
}

TEST(Settings, Validation) {
    GenerationParams g;
    EXPECT_EQ(g.temperature, 0.0);
    EXPECT_EQ(g.top_p, 1.0);
    g.top_p = 0.0;
    EXPECT_THROW(g.validate(), SettingsError);
    PromptTemplate t{"s", "no image here", "Transcription:"};
    EXPECT_THROW(t.validate(), SettingsError);
    t.user = "{image} {image}";
    EXPECT_THROW(t.validate(), SettingsError);
    ProviderProfile p{.name = "x", .model_id = "", .endpoint = "e"};
    EXPECT_THROW(p.validate(), SettingsError);
    p.model_id = "m";
    p.price_in = -1;
    EXPECT_THROW(p.validate(), SettingsError);
    EXPECT_NO_THROW(default_prompts().validate());
}

TEST(Settings, DefaultPromptsCarryMarkers) {
    const auto p = default_prompts();
    EXPECT_NE(p.transcribe.system.find("minimizing the CER and WER"), std::string::npos);
    EXPECT_NE(p.transcribe.user.find("Carefully transcribe this page from an 18th/19th century document"),
              std::string::npos);
    EXPECT_TRUE(p.correct.requires_rough());
    EXPECT_FALSE(p.transcribe.requires_rough());
}

}  // namespace
}  // namespace pearl
