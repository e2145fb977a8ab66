#include <sstream>

#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "newsforge/cli.hpp"
#include "newsforge/error.hpp"
#include "support.hpp"

using namespace newsforge;
using nlohmann::json;
namespace ts = testing_support;

namespace {

struct CliRun {
    int code = -1;
    std::string out, err;
};

struct CliFixture : ::testing::Test {
    ts::TempDir dir;
    std::filesystem::path config;

    void SetUp() override { config = ts::write_config(dir.path()); }

    CliRun run(std::vector<std::string> args, const CliHooks& hooks = {}) {
        args.insert(args.begin(), {"--config", config.string()});
        std::ostringstream out, err;
        CliRun r;
        r.code = run_cli(args, out, err, hooks);
        r.out = out.str();
        r.err = err.str();
        return r;
    }

    void import_fixtures() {
        ASSERT_EQ(run({"import", "--file", (ts::fixtures() / "corpus/real.jsonl").string(), "--category", "real"}).code,
                  kExitOk);
        ASSERT_EQ(run({"import", "--file", (ts::fixtures() / "corpus/human_fake.jsonl").string(), "--category",
                       "human_fake"})
                      .code,
                  kExitOk);
    }

    // Predictions that match every stored label.
    std::filesystem::path write_oracle() {
        std::ostringstream lines;
        std::ifstream in(dir / "corpus.jsonl");
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto a = json::parse(line);
            lines << json{{"article_id", a["id"]}, {"predicted", a["category"] == "real" ? "real" : "fake"}}.dump()
                  << '\n';
        }
        const auto path = dir / "oracle.jsonl";
        ts::write_file(path, lines.str());
        return path;
    }
};

}  // namespace

TEST_F(CliFixture, ImportReportsCounts) {
    auto r = run({"import", "--file", (ts::fixtures() / "corpus/real.jsonl").string(), "--category", "real"});
    EXPECT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("imported 40 skipped_duplicates 0 total 40"), std::string::npos) << r.out;
    r = run({"import", "--file", (ts::fixtures() / "corpus/real.jsonl").string(), "--category", "real"});
    EXPECT_NE(r.out.find("imported 0 skipped_duplicates 40"), std::string::npos) << r.out;
}

TEST_F(CliFixture, GenerateSummaryLine) {
    import_fixtures();
    const auto r = run({"generate", "--strategy", "VLPROMPT", "--model", "gpt-3.5", "--target", "3"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("qualified 3 sources_used 3 success_rate 1.000 avg_requests 2.000"), std::string::npos)
        << r.out;
    const auto report_line = r.out.substr(r.out.find("report ") + 7);
    const auto report = json::parse(ts::read_file(report_line.substr(0, report_line.find('\n'))));
    EXPECT_EQ(report["accepted_count"], 3);

    // A second run draws only unused sources.
    const auto again = run({"generate", "--strategy", "VLPROMPT", "--model", "gpt-3.5", "--target", "3"});
    ASSERT_EQ(again.code, kExitOk) << again.err;
    std::set<std::string> sources;
    std::ifstream in(dir / "corpus.jsonl");
    std::string line;
    while (std::getline(in, line)) {
        const auto a = json::parse(line);
        if (a["category"] == "generated") sources.insert(a["source_id"].get<std::string>());
    }
    EXPECT_EQ(sources.size(), 6u);
}

TEST_F(CliFixture, UsageErrors) {
    import_fixtures();
    EXPECT_EQ(run({"generate", "--strategy", "NOPE", "--target", "3"}).code, kExitUsage);
    EXPECT_EQ(run({"generate", "--strategy", "QA", "--target", "0"}).code, kExitUsage);
    EXPECT_EQ(run({"generate", "--target", "3"}).code, kExitUsage);
    EXPECT_EQ(run({"bench", "--predictions", (dir / "missing.csv").string()}).code, kExitUsage);
    EXPECT_EQ(run({"bench", "--split", "sideways", "--predictions", "x"}).code, kExitUsage);
    EXPECT_EQ(run({"analyze", "--explanations", (dir / "missing.jsonl").string()}).code, kExitUsage);
    EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
}

TEST_F(CliFixture, StrictPoolExhaustion) {
    import_fixtures();
    auto r = run({"generate", "--strategy", "SUMMARY", "--target", "45", "--strict"});
    EXPECT_EQ(r.code, kExitTargetMissed);
    EXPECT_NE(r.out.find("qualified 40 sources_used 40"), std::string::npos) << r.out;
    r = run({"generate", "--strategy", "SUMMARY", "--target", "45"});
    EXPECT_EQ(r.code, kExitModuleError);  // nothing left to draw from
}

TEST_F(CliFixture, BenchOracleScoresOne) {
    import_fixtures();
    ASSERT_EQ(run({"generate", "--strategy", "QA", "--model", "m", "--target", "4"}).code, kExitOk);
    const auto oracle = write_oracle();
    const auto report_path = dir / "bench.json";
    const auto r = run({"bench", "--detector", "oracle", "--predictions", oracle.string(), "--report",
                        report_path.string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("oracle"), std::string::npos);
    const auto report = json::parse(ts::read_file(report_path));
    for (const char* m : {"acc", "f1", "prc", "rcl"}) EXPECT_DOUBLE_EQ(report["overall"][m].get<double>(), 1.0) << m;
    EXPECT_TRUE(report["per_group"].contains("QA@m"));
}

TEST_F(CliFixture, BenchPromptDetector) {
    import_fixtures();
    std::ifstream in(dir / "corpus.jsonl");
    std::string line;
    std::getline(in, line);
    const auto exemplar = json::parse(line)["id"].get<std::string>();
    const auto r = run({"bench", "--exemplar", exemplar, "--model", "judge", "--report", (dir / "p.json").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto report = json::parse(ts::read_file(dir / "p.json"));
    // The mock always answers "fake": recall 1, precision = fakes / scored.
    EXPECT_DOUBLE_EQ(report["overall"]["rcl"].get<double>(), 1.0);
    EXPECT_NEAR(report["overall"]["prc"].get<double>(), 8.0 / 47.0, 1e-12);
}

TEST_F(CliFixture, AnalyzeWritesWordClouds) {
    import_fixtures();
    ASSERT_EQ(run({"generate", "--strategy", "VLPROMPT", "--model", "m", "--target", "2"}).code, kExitOk);
    const auto out_dir = dir / "analysis";
    const auto csv = dir / "neg.csv";
    const auto r = run({"analyze", "--out-dir", out_dir.string(), "--negation-csv", csv.string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto freq = json::parse(ts::read_file(out_dir / "frequency.json"));
    ASSERT_TRUE(freq.contains("VLPROMPT@m"));
    EXPECT_EQ(freq["VLPROMPT@m"]["unigrams"]["candid"], 2);
    EXPECT_TRUE(std::filesystem::exists(out_dir / "wordcloud-VLPROMPT_m.json"));
    EXPECT_EQ(ts::read_file(csv).substr(0, 8), "pair_id,");

    const auto expl = dir / "expl.jsonl";
    ts::write_file(expl, R"({"group": "g", "text": "It does not mention the article."})" "\n");
    const auto r2 = run({"analyze", "--explanations", expl.string(), "--out-dir", (dir / "a2").string()});
    ASSERT_EQ(r2.code, kExitOk) << r2.err;
    const auto f2 = json::parse(ts::read_file(dir / "a2" / "frequency.json"));
    EXPECT_EQ(f2["g"]["unigrams"], json({{"doe", 1}, {"mention", 1}}));
}

TEST_F(CliFixture, ExportImportRoundTrip) {
    import_fixtures();
    const auto out = dir / "export.jsonl";
    auto r = run({"export", "--out", out.string(), "--category", "real"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("\"real\":40"), std::string::npos) << r.out;

    ts::TempDir other;
    const auto other_cfg = ts::write_config(other.path());
    std::ostringstream o, e;
    ASSERT_EQ(run_cli({"--config", other_cfg.string(), "import", "--file", out.string(), "--preserve-ids"}, o, e),
              kExitOk)
        << e.str();
    EXPECT_NE(o.str().find("imported 40"), std::string::npos);
    CorpusStore a(dir / "corpus.jsonl"), b(other / "corpus.jsonl");
    for (const auto& art : a.select(ArticleFilter{std::set<Category>{Category::Real}, {}, {}}))
        EXPECT_EQ(b.get(art.id).text, art.text);
}

TEST_F(CliFixture, ServeAnswersProgress) {
    ts::TempDir data;
    {
        CorpusStore store(dir / "corpus.jsonl");
        ts::fill_study_corpus(store, 12, 10);
    }
    int status = 0;
    CliHooks hooks;
    hooks.on_listening = [&](int port, std::function<void()> stop) {
        httplib::Client client("127.0.0.1", port);
        auto created = client.Post("/api/sessions", json{{"annotator_id", "x"}}.dump(), "application/json");
        if (created && created->status == 201) {
            const auto id = json::parse(created->body)["session_id"].get<std::string>();
            auto p = client.Get("/api/sessions/" + id + "/progress");
            if (p) status = p->status;
        }
        stop();
    };
    const auto r = run({"serve", "--port", "0"}, hooks);
    EXPECT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(status, 200);
    EXPECT_NE(r.out.find("listening on http://127.0.0.1:"), std::string::npos);
    EXPECT_TRUE(std::filesystem::exists(dir / "study" / "sessions.jsonl"));
}

TEST(CliConfig, InterpolatesEnvironment) {
    ::setenv("NEWSFORGE_TEST_KEY", "sekret", 1);
    EXPECT_EQ(interpolate_env("Bearer ${NEWSFORGE_TEST_KEY}"), "Bearer sekret");
    EXPECT_EQ(interpolate_env("$${NEWSFORGE_TEST_KEY}"), "${NEWSFORGE_TEST_KEY}");
    ::unsetenv("NEWSFORGE_TEST_UNSET");
    try {
        interpolate_env("${NEWSFORGE_TEST_UNSET}");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ConfigInvalid);
    }
}

TEST(CliConfig, RejectsBadConfigs) {
    ts::TempDir dir;
    auto expect_invalid = [&](const json& extra) {
        const auto path = ts::write_config(dir.path(), extra);
        try {
            AppConfig::load(path);
            ADD_FAILURE() << extra.dump();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::ConfigInvalid) << extra.dump();
        }
    };
    expect_invalid({{"template_dir", "/no/such/dir"}});
    expect_invalid({{"default_backend", "elsewhere"}});
    expect_invalid({{"parallelism", 0}});
    expect_invalid({{"corpus_path", "${NEWSFORGE_TEST_UNSET_TOO}"}});

    const auto cfg = AppConfig::load(ts::write_config(dir.path()));
    EXPECT_EQ(cfg.corpus_path, dir / "corpus.jsonl");
    EXPECT_EQ(cfg.seed, 11u);

    std::ostringstream out, err;
    EXPECT_EQ(run_cli({"--config", (dir / "absent.json").string(), "export", "--out", "x"}, out, err),
              kExitModuleError);
}
