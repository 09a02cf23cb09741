#include "pearl/workflows/workflows.hpp"

#include "../support/projects.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <mutex>

namespace pearl::workflows {
namespace {

using metrics::MetricLevel;
using metrics::MetricMode;
using providers::MockBehavior;
using providers::MockOutcome;

// Builds mock providers over fixed ground truth, honouring each profile's
// seed, noise rate and echo flag the way the settings-driven factory does.
ProviderFactory truth_factory(std::vector<std::string> truth,
                              std::map<std::size_t, std::vector<MockOutcome>> schedule = {}) {
    return [truth = std::move(truth), schedule = std::move(schedule)](const ProviderProfile& profile,
                                                                      const providers::SendOptions&) {
        MockBehavior b;
        b.ground_truth = truth;
        b.char_sub_rate = profile.mock.char_sub_rate;
        b.seed = profile.mock.seed;
        b.echo_rough = profile.mock.echo_rough;
        b.failure_schedule = schedule;
        return std::make_shared<providers::MockProvider>(profile, b);
    };
}

WorkflowOptions fast_options(ProviderFactory factory) {
    WorkflowOptions o;
    o.retry_pause = std::chrono::milliseconds(0);
    o.factory = std::move(factory);
    return o;
}

ProviderProfile noisy(std::string name, std::string model, double rate, std::uint64_t seed = 1) {
    auto p = testing::mock_profile(std::move(name), std::move(model));
    p.mock.char_sub_rate = rate;
    p.mock.seed = seed;
    return p;
}

TEST(TranscribeAll, ZeroNoiseFillsRawWithTruth) {
    auto project = testing::image_project(3);
    const auto truth = testing::page_texts(3);
    const auto out = transcribe_all(project, testing::mock_profile(), {}, fast_options(truth_factory(truth)));
    for (std::size_t i = 0; i < 3; ++i) {
        ASSERT_TRUE(project.pages[i].raw_transcript);
        EXPECT_EQ(project.pages[i].raw_transcript->text, truth[i]);
        EXPECT_EQ(project.pages[i].raw_transcript->origin, TranscriptOrigin::llm);
        EXPECT_EQ(project.pages[i].status, PageStatus::transcribed);
        ASSERT_EQ(project.pages[i].provenance.size(), 1u);
        EXPECT_EQ(project.pages[i].provenance[0].action, "transcribe");
        EXPECT_EQ(project.pages[i].provenance[0].model_id, "mock-model-a");
    }
    EXPECT_EQ(out.batch.stats.pages_ok, 3u);
}

TEST(TranscribeAll, TerminalFailureIsolatesPage) {
    auto project = testing::image_project(3);
    const auto out = transcribe_all(project, testing::mock_profile(), {},
                                    fast_options(truth_factory(testing::page_texts(3), {{1, {MockOutcome::auth}}})));
    EXPECT_EQ(project.pages[0].status, PageStatus::transcribed);
    EXPECT_EQ(project.pages[1].status, PageStatus::error);
    EXPECT_FALSE(project.pages[1].raw_transcript);
    EXPECT_EQ(project.pages[2].status, PageStatus::transcribed);
    EXPECT_EQ(out.batch.stats.pages_failed, 1u);
}

TEST(TranscribeAll, RerunReplacesRawAndGrowsProvenance) {
    auto project = testing::image_project(2);
    const auto truth = testing::page_texts(2);
    transcribe_all(project, noisy("a", "model-a", 0.2, 1), {}, fast_options(truth_factory(truth)));
    const auto first = project.pages[0].raw_transcript->text;
    transcribe_all(project, noisy("a", "model-a", 0.2, 2), {}, fast_options(truth_factory(truth)));
    EXPECT_NE(project.pages[0].raw_transcript->text, first);
    EXPECT_EQ(project.pages[0].provenance.size(), 2u);
}

TEST(TranscribeAll, FailedRerunKeepsEarlierText) {
    auto project = testing::image_project(2);
    const auto truth = testing::page_texts(2);
    transcribe_all(project, testing::mock_profile(), {}, fast_options(truth_factory(truth)));
    transcribe_all(project, testing::mock_profile(), {},
                   fast_options(truth_factory(truth, {{0, {MockOutcome::auth}}})));
    ASSERT_TRUE(project.pages[0].raw_transcript);
    EXPECT_EQ(project.pages[0].raw_transcript->text, truth[0]);
    EXPECT_EQ(project.pages[0].status, PageStatus::error);
}

TEST(CorrectAll, ScriptedPerfectCorrectorRemovesAllErrors) {
    auto project = testing::image_project(4);
    const auto truth = testing::page_texts(4);
    const auto opts = fast_options(truth_factory(truth));
    transcribe_all(project, noisy("a", "model-a", 0.05), {}, opts);
    const auto out = correct_all(project, testing::mock_profile("b", "model-b"), {}, opts);
    EXPECT_TRUE(out.warnings.empty());
    std::vector<std::optional<std::string>> hyps;
    for (const auto& p : project.pages) hyps.push_back(p.corrected_transcript->text);
    EXPECT_EQ(pooled_report(truth, hyps, MetricMode::strict, MetricLevel::character).rate, 0.0);
    EXPECT_EQ(project.pages[0].status, PageStatus::corrected);
}

TEST(CorrectAll, SameModelWarns) {
    auto project = testing::image_project(2);
    const auto opts = fast_options(truth_factory(testing::page_texts(2)));
    transcribe_all(project, testing::mock_profile(), {}, opts);
    const auto out = correct_all(project, testing::mock_profile(), {}, opts);
    ASSERT_FALSE(out.warnings.empty());
    EXPECT_NE(out.warnings[0].find("mock-model-a"), std::string::npos);
    EXPECT_EQ(out.batch.stats.pages_ok, 2u);
}

// Records every request it receives and replies with the marker alone plus "ok".
class RecordingProvider : public providers::Provider {
public:
    explicit RecordingProvider(ProviderProfile p) : profile_(std::move(p)) {}
    const ProviderProfile& profile() const override { return profile_; }
    providers::CompletionResult send(const providers::ProviderRequest& request, const GenerationParams&) override {
        std::lock_guard lock(mutex_);
        users.push_back(request.user_text());
        providers::CompletionResult r;
        r.text = request.answer_marker + " ok";
        return r;
    }
    std::vector<std::string> users;

private:
    ProviderProfile profile_;
    std::mutex mutex_;
};

TEST(CorrectAll, ExternalRawIsEmbeddedInRoughTags) {
    auto project = testing::image_project(1);
    const std::vector<std::pair<std::size_t, std::string>> external = {{0, "teh furrs of Montreal"}};
    import_external_transcripts(project, external);
    auto recorder = std::make_shared<RecordingProvider>(testing::mock_profile("b", "model-b"));
    auto opts = fast_options([&](const ProviderProfile&, const providers::SendOptions&) { return recorder; });
    const auto out = correct_all(project, recorder->profile(), {}, opts);
    EXPECT_TRUE(out.warnings.empty());
    ASSERT_EQ(recorder->users.size(), 1u);
    EXPECT_NE(recorder->users[0].find("<Rough Transcription>teh furrs of Montreal</Rough Transcription>"),
              std::string::npos);
    EXPECT_EQ(project.pages[0].corrected_transcript->text, "ok");
    EXPECT_EQ(project.pages[0].raw_transcript->origin, TranscriptOrigin::external_htr);
}

TEST(CorrectAll, PagesWithoutRawFailIndividually) {
    auto project = testing::image_project(2);
    project.pages[1].raw_transcript = TranscriptText{"x"};
    auto b = testing::mock_profile();
    b.mock.echo_rough = true;
    const auto out = correct_all(project, b, {}, fast_options(truth_factory(testing::page_texts(2))));
    EXPECT_EQ(project.pages[0].status, PageStatus::error);
    EXPECT_EQ(project.pages[1].corrected_transcript->text, "x");
    EXPECT_EQ(out.batch.stats.pages_failed, 1u);
}

TEST(Pooled, EqualsTotalErrorsOverTotalReference) {
    const std::vector<std::string> truth = {"the cat sat", "a dog ran far away", "x"};
    const std::vector<std::optional<std::string>> hyps = {"the bat sat", "a dog", std::nullopt};
    for (auto level : {MetricLevel::word, MetricLevel::character}) {
        const auto pooled = pooled_report(truth, hyps, MetricMode::strict, level);
        std::size_t errors = 0, reference = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            const auto r = metrics::error_rate(truth[i], hyps[i].value_or(""), MetricMode::strict, level);
            errors += r.counts.errors();
            reference += r.counts.reference;
        }
        EXPECT_DOUBLE_EQ(pooled.rate, static_cast<double>(errors) / static_cast<double>(reference));
    }
    // Word level by hand: 1 sub + 3 del + 1 del over 3 + 5 + 1 words.
    EXPECT_DOUBLE_EQ(pooled_report(truth, hyps, MetricMode::strict, MetricLevel::word).rate, 5.0 / 9.0);
}

TEST(Pooled, DiffersFromMeanOfPageRates) {
    const std::vector<std::string> truth = {"a", "b c d e f g h i j"};
    const std::vector<std::optional<std::string>> hyps = {"z", "b c d e f g h i j"};
    EXPECT_DOUBLE_EQ(pooled_report(truth, hyps, MetricMode::strict, MetricLevel::word).rate, 0.1);
}

ExperimentSpec base_spec(std::size_t pages, Pipeline pipeline, int runs = 3) {
    ExperimentSpec spec;
    spec.project = testing::image_project(pages);
    spec.ground_truth = testing::page_texts(pages);
    spec.pipeline = pipeline;
    spec.transcribe_profile = testing::mock_profile();
    spec.runs = runs;
    spec.master_seed = 42;
    spec.options = fast_options(truth_factory(spec.ground_truth));
    return spec;
}

TEST(Experiment, ZeroNoiseGivesZeroEverywhere) {
    auto spec = base_spec(3, Pipeline::transcribe_only);
    const auto report = run_experiment(spec);
    ASSERT_TRUE(report.ok()) << report.error;
    EXPECT_EQ(report.cells.size(), 4u);
    for (const auto& c : report.cells) {
        EXPECT_EQ(c.aggregate.n, 3u);
        EXPECT_EQ(c.aggregate.mean, 0.0);
        EXPECT_EQ(c.aggregate.stddev, 0.0);
    }
}

TEST(Experiment, PerfectCorrectorImprovesFully) {
    auto spec = base_spec(4, Pipeline::transcribe_then_correct);
    spec.transcribe_profile = noisy("a", "model-a", 0.05);
    spec.correct_profile = testing::mock_profile("b", "model-b");
    const auto report = run_experiment(spec);
    ASSERT_TRUE(report.ok()) << report.error;
    const auto* c = report.cell("corrected", MetricMode::strict, MetricLevel::character);
    ASSERT_NE(c, nullptr);
    EXPECT_EQ(c->aggregate.mean, 0.0);
    ASSERT_TRUE(c->improvement);
    EXPECT_DOUBLE_EQ(*c->improvement, 1.0);
    EXPECT_GT(report.cell("initial", MetricMode::strict, MetricLevel::character)->aggregate.stddev, 0.0);
}

TEST(Experiment, IdentityCorrectorImprovesNothing) {
    auto spec = base_spec(4, Pipeline::transcribe_then_correct);
    spec.transcribe_profile = noisy("a", "model-a", 0.05);
    auto echo = testing::mock_profile("b", "model-b");
    echo.mock.echo_rough = true;
    spec.correct_profile = echo;
    const auto report = run_experiment(spec);
    ASSERT_TRUE(report.ok()) << report.error;
    for (const auto& c : report.cells) {
        if (c.stage != "corrected") continue;
        ASSERT_TRUE(c.improvement);
        EXPECT_DOUBLE_EQ(*c.improvement, 0.0);
    }
}

TEST(Experiment, CorrectExternalUsesImportedRaw) {
    auto spec = base_spec(2, Pipeline::correct_external, 2);
    const std::vector<std::pair<std::size_t, std::string>> external = {{0, "Page 1: My deer Sir"},
                                                                        {1, "Page 2: My dear Sir, the furs"}};
    import_external_transcripts(spec.project, external);
    spec.correct_profile = testing::mock_profile("b", "model-b");
    const auto report = run_experiment(spec);
    ASSERT_TRUE(report.ok()) << report.error;
    const auto* initial = report.cell("initial", MetricMode::strict, MetricLevel::word);
    EXPECT_EQ(initial->transcribe_model, "external_htr");
    EXPECT_GT(initial->aggregate.mean, 0.0);
    EXPECT_EQ(initial->aggregate.stddev, 0.0);
    EXPECT_DOUBLE_EQ(*report.cell("corrected", MetricMode::strict, MetricLevel::word)->improvement, 1.0);
    EXPECT_FALSE(report.runs[0].transcribe);
}

TEST(Experiment, MasterSeedReproducesAndRunsDiffer) {
    auto spec = base_spec(3, Pipeline::transcribe_only, 4);
    spec.transcribe_profile = noisy("a", "model-a", 0.1);
    const auto a = run_experiment(spec);
    const auto b = run_experiment(spec);
    const auto* ca = a.cell("initial", MetricMode::strict, MetricLevel::character);
    const auto* cb = b.cell("initial", MetricMode::strict, MetricLevel::character);
    EXPECT_EQ(ca->per_run, cb->per_run);
    EXPECT_GT(ca->aggregate.stddev, 0.0);
    EXPECT_NE(a.runs[0].seed, a.runs[1].seed);
    spec.master_seed = 43;
    EXPECT_NE(run_experiment(spec).cell("initial", MetricMode::strict, MetricLevel::character)->per_run, ca->per_run);
}

TEST(Experiment, RunSeedIsFixedFunction) {
    EXPECT_EQ(run_seed(0, 0), providers::splitmix64(0));
    EXPECT_EQ(run_seed(10, 3), providers::splitmix64(13));
}

TEST(Experiment, AbortedRunKeepsPartialResults) {
    auto spec = base_spec(2, Pipeline::transcribe_only, 3);
    int calls = 0;
    const auto truth = spec.ground_truth;
    spec.options.factory = [&](const ProviderProfile& p, const providers::SendOptions& o) {
        std::map<std::size_t, std::vector<MockOutcome>> schedule;
        if (++calls == 2) schedule = {{0, {MockOutcome::auth}}, {1, {MockOutcome::auth}}};
        return truth_factory(truth, schedule)(p, o);
    };
    const auto report = run_experiment(spec);
    EXPECT_FALSE(report.ok());
    EXPECT_EQ(report.runs_completed, 1);
    EXPECT_NE(report.error.find("run 2"), std::string::npos);
    EXPECT_EQ(report.cells[0].per_run.size(), 1u);
}

TEST(Experiment, SpecValidation) {
    auto spec = base_spec(2, Pipeline::transcribe_then_correct);
    EXPECT_THROW(run_experiment(spec), WorkflowError);
    spec = base_spec(2, Pipeline::transcribe_only);
    spec.ground_truth.pop_back();
    EXPECT_THROW(run_experiment(spec), WorkflowError);
    spec = base_spec(2, Pipeline::transcribe_only, 0);
    EXPECT_THROW(run_experiment(spec), WorkflowError);
}

TEST(Experiment, ReportFilesHaveTableLayout) {
    auto spec = base_spec(2, Pipeline::transcribe_then_correct, 2);
    spec.transcribe_profile = noisy("a", "model-a", 0.1);
    spec.correct_profile = testing::mock_profile("b", "model-b");
    const auto report = run_experiment(spec);
    testing::TempDir dir;
    write_report(report, dir.path());
    std::ifstream txt(dir / "experiment_report.txt");
    std::string table((std::istreambuf_iterator<char>(txt)), std::istreambuf_iterator<char>());
    for (const char* col : {"Average (%)", "Std. Dev.", "High (%)", "Low (%)", "Improvement (%)"}) {
        EXPECT_NE(table.find(col), std::string::npos) << col;
    }
    std::ifstream js(dir / "experiment_report.json");
    const auto j = nlohmann::json::parse(js);
    EXPECT_EQ(j["version"], 1);
    EXPECT_EQ(j["cells"].size(), 8u);
    EXPECT_EQ(j["runs"].size(), 2u);
    EXPECT_TRUE(j["cells"][0].contains("stddev"));
}

}  // namespace
}  // namespace pearl::workflows
