#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "newsforge/detection.hpp"
#include "newsforge/error.hpp"
#include "support.hpp"

using namespace newsforge;
namespace ts = testing_support;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::InvalidArgument;
}

// Builds predictions/labels realizing an exact confusion matrix.
void realize(const Confusion& c, std::vector<Prediction>& preds, LabelMap& labels) {
    int id = 0;
    auto push = [&](NewsLabel truth, PredictedLabel p, std::int64_t n) {
        for (std::int64_t i = 0; i < n; ++i) {
            const auto key = "a" + std::to_string(id++);
            labels[key] = truth;
            preds.push_back({key, p, std::nullopt, "t"});
        }
    };
    push(NewsLabel::Fake, PredictedLabel::Fake, c.tp);
    push(NewsLabel::Real, PredictedLabel::Fake, c.fp);
    push(NewsLabel::Fake, PredictedLabel::Real, c.fn);
    push(NewsLabel::Real, PredictedLabel::Real, c.tn);
}

BenchMetrics metrics_for(const Confusion& c) {
    std::vector<Prediction> preds;
    LabelMap labels;
    realize(c, preds, labels);
    return evaluate(preds, labels);
}

// Corpus with `reals` real articles, `fakes` generated ones and `human` human fakes.
void build(CorpusStore& store, int reals, int fakes, int human) {
    ts::fill_real(store, reals);
    const auto src = store.sample_sources(1, static_cast<std::size_t>(reals));
    for (int i = 0; i < fakes; ++i) {
        Article g;
        g.text = "changed story " + std::to_string(i);
        g.category = Category::Generated;
        g.strategy = i % 2 ? StrategyId::QA : StrategyId::VLPrompt;
        g.model_name = "m";
        g.source_id = src[static_cast<std::size_t>(i) % src.size()];
        store.add(g);
    }
    for (int i = 0; i < human; ++i) {
        Article h;
        h.text = "rumor number " + std::to_string(i);
        h.category = Category::HumanFake;
        store.add(h);
    }
}

std::vector<Prediction> oracle_predictions(const CorpusStore& store) {
    std::vector<Prediction> out;
    for (const auto& a : store.select({}))
        out.push_back({a.id, a.category == Category::Real ? PredictedLabel::Real : PredictedLabel::Fake,
                       std::nullopt, "oracle"});
    return out;
}

}  // namespace

TEST(Metrics, PerfectClassifier) {
    const auto m = metrics_for({5, 0, 0, 5});
    EXPECT_DOUBLE_EQ(*m.acc, 1.0);
    EXPECT_DOUBLE_EQ(*m.f1, 1.0);
    EXPECT_DOUBLE_EQ(*m.prc, 1.0);
    EXPECT_DOUBLE_EQ(*m.rcl, 1.0);
}

TEST(Metrics, HandComputedMixedCase) {
    const auto m = metrics_for({3, 1, 2, 4});
    EXPECT_DOUBLE_EQ(*m.acc, 0.7);
    EXPECT_DOUBLE_EQ(*m.prc, 0.75);
    EXPECT_DOUBLE_EQ(*m.rcl, 0.6);
    EXPECT_NEAR(*m.f1, 2.0 / 3.0, 1e-12);
}

TEST(Metrics, AllFakeOnHalfFakeSet) {
    const auto m = metrics_for({6, 6, 0, 0});
    EXPECT_DOUBLE_EQ(*m.prc, 0.5);
    EXPECT_DOUBLE_EQ(*m.rcl, 1.0);
    EXPECT_NEAR(*m.f1, 2.0 / 3.0, 1e-12);
    EXPECT_DOUBLE_EQ(*m.acc, 0.5);
}

TEST(Metrics, UndefinedDenominatorsAreEmpty) {
    const auto m = metrics_for({0, 0, 4, 6});  // never predicts fake
    EXPECT_FALSE(m.prc);
    EXPECT_DOUBLE_EQ(*m.rcl, 0.0);
    EXPECT_FALSE(m.f1);
    EXPECT_DOUBLE_EQ(*m.acc, 0.6);
}

TEST(Metrics, UnparseableExcludedAndCounted) {
    std::vector<Prediction> preds = {{"a", PredictedLabel::Fake, {}, "t"}, {"b", PredictedLabel::Unparseable, {}, "t"}};
    LabelMap labels = {{"a", NewsLabel::Fake}, {"b", NewsLabel::Real}};
    const auto m = evaluate(preds, labels);
    EXPECT_EQ(m.unparseable_count, 1);
    EXPECT_EQ(m.confusion.total(), 1);
}

TEST(Metrics, MissingLabel) {
    std::vector<Prediction> preds = {{"ghost", PredictedLabel::Fake, {}, "t"}};
    EXPECT_EQ(code_of([&] { evaluate(preds, {}); }), ErrorCode::MissingLabel);
    EXPECT_EQ(code_of([&] { evaluate_serial(preds, {}); }), ErrorCode::MissingLabel);
}

TEST(Metrics, ParallelMatchesSerialOnLargeInput) {
    std::mt19937 rng(3);
    std::vector<Prediction> preds;
    LabelMap labels;
    for (int i = 0; i < 20000; ++i) {
        const auto id = "x" + std::to_string(i);
        labels[id] = rng() % 2 ? NewsLabel::Fake : NewsLabel::Real;
        const auto r = rng() % 5;
        preds.push_back({id, r == 0 ? PredictedLabel::Unparseable : r % 2 ? PredictedLabel::Fake : PredictedLabel::Real,
                         {}, "t"});
    }
    const auto a = evaluate(preds, labels), b = evaluate_serial(preds, labels);
    EXPECT_EQ(a.confusion, b.confusion);
    EXPECT_EQ(a.unparseable_count, b.unparseable_count);
    EXPECT_EQ(a.f1, b.f1);
}

TEST(Classify, MockLabels) {
    CorpusStore store;
    ts::fill_real(store, 2);
    const auto ids = store.sample_sources(0, 2);
    const auto set = TemplateSet::load_directory(ts::templates());
    const auto& tmpl = set.detection();
    auto run = [&](const std::string& reply) {
        Gateway g(std::make_shared<MockBackend>(std::vector<MockReply>{{reply, FinishReason::Complete, false}}),
                  {1, 0});
        return classify(store.get(ids[0]), store.get(ids[1]), NewsLabel::Real, g, tmpl).predicted;
    };
    EXPECT_EQ(run("fake"), PredictedLabel::Fake);
    EXPECT_EQ(run("It is Real news"), PredictedLabel::Real);
    EXPECT_EQ(run("unsure"), PredictedLabel::Unparseable);
}

TEST(Ingest, CsvWithDetectorLineAndCaseInsensitiveLabels) {
    CorpusStore store;
    ts::fill_real(store, 2);
    const auto ids = store.sample_sources(0, 2);
    ts::TempDir dir;
    ts::write_file(dir / "p.csv", "# detector: gpt-x\narticle_id,predicted\n" + ids[0] + ",FAKE\n" + ids[1] +
                                      ",\"real\"\n");
    const auto preds = ingest_external_predictions(dir / "p.csv", &store);
    ASSERT_EQ(preds.size(), 2u);
    EXPECT_EQ(preds[0].predicted, PredictedLabel::Fake);
    EXPECT_EQ(preds[1].predicted, PredictedLabel::Real);
    EXPECT_EQ(preds[0].detector_name, "gpt-x");
}

TEST(Ingest, JsonlAndIntegrityErrors) {
    CorpusStore store;
    ts::fill_real(store, 1);
    const auto id = store.sample_sources(0, 1)[0];
    ts::TempDir dir;
    ts::write_file(dir / "p.jsonl", "{\"detector_name\": \"d\"}\n{\"article_id\": \"" + id +
                                        "\", \"predicted\": \"real\", \"raw_output\": \"Real.\"}\n");
    const auto preds = ingest_external_predictions(dir / "p.jsonl", &store);
    ASSERT_EQ(preds.size(), 1u);
    EXPECT_EQ(preds[0].raw_output, "Real.");
    EXPECT_EQ(preds[0].detector_name, "d");

    ts::write_file(dir / "u.csv", "article_id,predicted\nnot-an-id,fake\n");
    EXPECT_EQ(code_of([&] { ingest_external_predictions(dir / "u.csv", &store); }), ErrorCode::UnknownArticleId);
    ts::write_file(dir / "m.csv", "article_id,predicted\n" + id + ",perhaps\n");
    EXPECT_EQ(code_of([&] { ingest_external_predictions(dir / "m.csv", &store); }), ErrorCode::MalformedRow);
    ts::write_file(dir / "h.csv", "id,label\nx,fake\n");
    EXPECT_EQ(code_of([&] { ingest_external_predictions(dir / "h.csv", &store); }), ErrorCode::MalformedRow);
}

TEST(Bench, OracleScoresPerfectlyOnBothSplits) {
    CorpusStore store;
    build(store, 10, 6, 4);
    DetectorSpec spec{"oracle", oracle_predictions(store), std::nullopt};
    for (auto split : {BenchSplit::WithHumanFakes, BenchSplit::WithoutHumanFakes}) {
        const auto r = run_benchmark(store, split, spec);
        EXPECT_DOUBLE_EQ(*r.overall.acc, 1.0);
        EXPECT_DOUBLE_EQ(*r.overall.f1, 1.0);
        EXPECT_EQ(r.missing_predictions, 0);
        for (const auto& [group, m] : r.per_group) EXPECT_DOUBLE_EQ(*m.f1, 1.0) << group;
    }
}

TEST(Bench, WithoutHumanFakesExcludesThem) {
    CorpusStore store;
    build(store, 10, 6, 4);
    const auto with = run_benchmark(store, BenchSplit::WithHumanFakes, {"o", oracle_predictions(store), {}});
    const auto without = run_benchmark(store, BenchSplit::WithoutHumanFakes, {"o", oracle_predictions(store), {}});
    EXPECT_EQ(with.overall.confusion.total(), 20);
    EXPECT_EQ(without.overall.confusion.total(), 16);
    EXPECT_TRUE(with.per_group.count("human_fake"));
    EXPECT_FALSE(without.per_group.count("human_fake"));
}

TEST(Bench, AlwaysRealClosedForm) {
    CorpusStore store;
    build(store, 10, 6, 0);
    std::vector<Prediction> preds;
    for (const auto& a : store.select({})) preds.push_back({a.id, PredictedLabel::Real, {}, "lazy"});
    const auto r = run_benchmark(store, BenchSplit::WithoutHumanFakes, {"lazy", preds, {}});
    EXPECT_DOUBLE_EQ(*r.overall.rcl, 0.0);
    EXPECT_DOUBLE_EQ(*r.overall.acc, 10.0 / 16.0);
}

TEST(Bench, SingleClassSelection) {
    CorpusStore store;
    ts::fill_real(store, 3);
    EXPECT_EQ(code_of([&] { run_benchmark(store, BenchSplit::WithHumanFakes, {"o", oracle_predictions(store), {}}); }),
              ErrorCode::SingleClassSelection);
}

TEST(Bench, PromptDetectorSkipsExemplar) {
    CorpusStore store;
    build(store, 4, 4, 0);
    const auto templates = TemplateSet::load_directory(ts::templates());
    Gateway g(ts::mock_config());  // always answers "fake"
    const auto exemplar = store.sample_sources(0, 1)[0];
    DetectorSpec spec;
    spec.name = "mock";
    spec.prompt = PromptDetector{&g, &templates.detection(), exemplar, NewsLabel::Real, "m", 4};
    const auto r = run_benchmark(store, BenchSplit::WithHumanFakes, spec);
    EXPECT_EQ(r.predictions.size(), 7u);
    EXPECT_EQ(r.missing_predictions, 0);
    EXPECT_DOUBLE_EQ(*r.overall.rcl, 1.0);
    EXPECT_DOUBLE_EQ(*r.overall.prc, 4.0 / 7.0);
    const auto table = format_table(r);
    EXPECT_NE(table.find("ACC"), std::string::npos);
    EXPECT_NE(table.find("VLPROMPT@m"), std::string::npos);
}
