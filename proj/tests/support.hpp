#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "newsforge/article.hpp"
#include "newsforge/corpus.hpp"
#include "newsforge/gateway.hpp"

namespace testing_support {

namespace fs = std::filesystem;

inline fs::path fixtures() { return NEWSFORGE_FIXTURES; }
inline fs::path templates() { return NEWSFORGE_TEMPLATES; }

class TempDir {
public:
    TempDir() {
        std::string pattern = (fs::temp_directory_path() / "newsforge-XXXXXX").string();
        if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
        path_ = pattern;
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::trunc);
    out << content;
}

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline newsforge::Article real_article(const std::string& text, const std::string& date = "2020-05-01") {
    newsforge::Article a;
    a.text = text;
    a.category = newsforge::Category::Real;
    a.published_date = date;
    return a;
}

inline std::string source_text(int i) {
    return "The harbor office in town " + std::to_string(i) + " reported " + std::to_string(10 + i) +
           " ferry delays on Monday after a storm. Crews expect repairs to take " + std::to_string(2 + i % 5) +
           " days.";
}

/// In-memory store with `n` real articles.
inline void fill_real(newsforge::CorpusStore& store, int n) {
    for (int i = 0; i < n; ++i) store.add(real_article(source_text(i)));
}

inline std::string vlprompt_output(const std::string& article) {
    return "Step 1: harbor office, ferry delays, storm, repairs.\n"
           "Step 2: A commentator wants readers to distrust the harbor office.\n"
           "Step 3: The delays become a cover-up; repair time grows to weeks.\n"
           "Step 4:\n" +
           article + "\n";
}

inline std::string qa_output(const std::string& answer1, const std::string& answer2, const std::string& article) {
    return "Step 1: What caused the ferry delays?\n"
           "Step 2: The storm.\nAnswer1: " + answer1 + "\n"
           "Step 3: A labor strike.\n"
           "Step 4: " + article + "\n"
           "Step 5: A labor strike.\nAnswer2: " + answer2 + "\n";
}

inline const std::string kAltered =
    "Ferry service in the harbor collapsed on Monday after officials hid a structural fault. "
    "Crews now say repairs could take several weeks.";

/// Rule-driven mock answering every template in templates/ consistently.
inline nlohmann::json mock_rules() {
    using nlohmann::json;
    return json::array({
        {{"contains", "screening candidate articles"},
         {"text", "yes, the candidate changes the cause of the delays and the repair time."}},
        {{"contains", "Rewrite it into a fabricated"}, {"text", vlprompt_output(kAltered)}},
        {{"contains", "question about"}, {"text", qa_output("The storm.", "A labor strike.", kAltered)}},
        {{"contains", "Summarize it in a few sentences"}, {"text", kAltered}},
        {{"contains", "Decide whether a news article"}, {"text", "fake"}},
    });
}

inline newsforge::BackendConfig mock_config() {
    return newsforge::BackendConfig::from_json({{"kind", "mock"}, {"rules", mock_rules()}}, fs::current_path());
}

/// Writes a tool config into `dir` pointing at the repository templates.
inline fs::path write_config(const fs::path& dir, const nlohmann::json& extra = nlohmann::json::object()) {
    nlohmann::json cfg = {{"corpus_path", "corpus.jsonl"},
                          {"template_dir", templates().string()},
                          {"reports_dir", "reports"},
                          {"study_dir", "study"},
                          {"seed", 11},
                          {"parallelism", 2},
                          {"default_backend", "mock"},
                          {"backends", {{"mock", {{"kind", "mock"}, {"rules", mock_rules()}}}}}};
    for (const auto& [k, v] : extra.items()) cfg[k] = v;
    const auto path = dir / "config.json";
    write_file(path, cfg.dump(2));
    return path;
}

inline const std::vector<std::pair<newsforge::StrategyId, std::string>>& study_groups() {
    using newsforge::StrategyId;
    static const std::vector<std::pair<StrategyId, std::string>> groups = {
        {StrategyId::VLPrompt, "gpt-3.5"}, {StrategyId::VLPrompt, "gpt-4"},  {StrategyId::VLPrompt, "vicuna"},
        {StrategyId::Summary, "gpt-3.5"},  {StrategyId::QA, "gpt-3.5"},      {StrategyId::QAS, "gpt-3.5"},
        {StrategyId::AbRole, "gpt-3.5"},   {StrategyId::AbSem, "gpt-3.5"},
    };
    return groups;
}

/// `reals` real articles plus `per_group` generated ones for each study group.
inline void fill_study_corpus(newsforge::CorpusStore& store, int reals, int per_group) {
    fill_real(store, reals);
    const auto sources = store.sample_sources(0, static_cast<std::size_t>(reals));
    int k = 0;
    for (const auto& [strategy, model] : study_groups()) {
        for (int i = 0; i < per_group; ++i, ++k) {
            newsforge::Article g;
            g.text = "Rewritten account " + std::to_string(k) + ": the harbor office concealed a fault.";
            g.category = newsforge::Category::Generated;
            g.strategy = strategy;
            g.model_name = model;
            g.source_id = sources[static_cast<std::size_t>(k) % sources.size()];
            store.add(g);
        }
    }
}

}  // namespace testing_support
