#include "newsforge/pattern.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <nlohmann/json.hpp>

#include "newsforge/error.hpp"
#include "newsforge/porter.hpp"

namespace newsforge {

const std::set<std::string>& default_stopwords() {
    static const std::set<std::string> words = {
        "a",       "about",   "above",    "after",  "again",   "against", "all",     "am",     "an",
        "and",     "any",     "are",      "as",     "at",      "be",      "because", "been",   "before",
        "being",   "below",   "between",  "both",   "but",     "by",      "can",     "could",  "down",
        "during",  "each",    "few",      "for",    "from",    "further", "had",     "has",    "have",
        "having",  "he",      "her",      "here",   "hers",    "herself", "him",     "himself", "his",
        "how",     "i",       "if",       "in",     "into",    "is",      "it",      "its",    "itself",
        "just",    "me",      "more",     "most",   "my",      "myself",  "no",      "nor",    "not",
        "now",     "of",      "off",      "on",     "once",    "only",    "or",      "other",  "our",
        "ours",    "ourselves", "out",    "over",   "own",     "same",    "she",     "should", "so",
        "some",    "such",    "than",     "that",   "the",     "their",   "theirs",  "them",   "themselves",
        "then",    "there",   "these",    "they",   "this",    "those",   "through", "to",     "too",
        "under",   "until",   "up",       "very",   "was",     "we",      "were",    "what",   "when",
        "where",   "which",   "while",    "who",    "whom",    "why",     "will",    "with",   "would",
        "you",     "your",    "yours",    "yourself", "yourselves",
    };
    return words;
}

const std::set<std::string>& default_extra_filter() {
    static const std::set<std::string> words = {"article", "first", "second"};
    return words;
}

const std::set<std::string>& default_negation_lexicon() {
    static const std::set<std::string> words = {
        "not",     "no",        "never",   "none",      "nor",     "cannot",  "without",
        "risk",    "risks",     "concern", "concerns",  "fail",    "fails",   "failed",
        "failure", "danger",    "dangerous", "harm",    "harmful", "increase", "increases",
        "increased", "worsen",  "worsens",
    };
    return words;
}

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

// UTF-8 punctuation that splits words: U+2010..U+201F (dashes, quotes),
// U+2026 (ellipsis). U+2019 is an apostrophe and is dropped in-word.
std::size_t utf8_punct_len(std::string_view s, std::size_t i, bool& apostrophe) {
    apostrophe = false;
    if (i + 2 < s.size() && static_cast<unsigned char>(s[i]) == 0xE2 && static_cast<unsigned char>(s[i + 1]) == 0x80) {
        const auto third = static_cast<unsigned char>(s[i + 2]);
        if (third >= 0x90 && third <= 0x9F) {
            apostrophe = third == 0x99;
            return 3;
        }
        if (third == 0xA6) return 3;
    }
    return 0;
}

void count_tokens(const std::vector<std::string>& tokens, FrequencyTable& table) {
    table.token_count += static_cast<std::int64_t>(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        ++table.unigrams[tokens[i]];
        if (i + 1 < tokens.size()) ++table.bigrams[tokens[i] + " " + tokens[i + 1]];
    }
}

void merge_into(FrequencyTable& into, const FrequencyTable& from) {
    into.token_count += from.token_count;
    for (const auto& [k, v] : from.unigrams) into.unigrams[k] += v;
    for (const auto& [k, v] : from.bigrams) into.bigrams[k] += v;
}

std::set<std::string> stemmed_filter(const TokenPipelineConfig& config) {
    if (!config.stemming) return config.extra_filter;
    std::set<std::string> out;
    for (const auto& term : config.extra_filter) {
        std::string t = term;
        if (config.lowercase)
            for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        out.insert(porter_stem(t));
    }
    return out;
}

std::vector<std::string> tokenize_with(std::string_view text, const TokenPipelineConfig& config,
                                       const std::set<std::string>& filter) {
    std::vector<std::string> out;
    for (auto& token : raw_tokens(text, config)) {
        if (config.stopword_list.count(token)) continue;
        if (config.stemming) token = porter_stem(token);
        if (token.empty() || filter.count(token)) continue;
        out.push_back(std::move(token));
    }
    return out;
}

}  // namespace

std::vector<std::string> raw_tokens(std::string_view text, const TokenPipelineConfig& config) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) tokens.push_back(std::move(current));
        current.clear();
    };
    for (std::size_t i = 0; i < text.size();) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (!config.strip_punctuation) {
            if (std::isspace(c)) {
                flush();
            } else {
                current += config.lowercase ? static_cast<char>(std::tolower(c)) : static_cast<char>(c);
            }
            ++i;
            continue;
        }
        bool apostrophe = false;
        if (const auto len = utf8_punct_len(text, i, apostrophe)) {
            if (!apostrophe) flush();
            i += len;
            continue;
        }
        if (c == '\'') {
            ++i;  // "doesn't" -> "doesnt"
            continue;
        }
        if (is_word_byte(c)) {
            current += config.lowercase ? static_cast<char>(std::tolower(c)) : static_cast<char>(c);
        } else {
            flush();
        }
        ++i;
    }
    flush();
    return tokens;
}

std::vector<std::string> tokenize(std::string_view text, const TokenPipelineConfig& config) {
    return tokenize_with(text, config, stemmed_filter(config));
}

std::map<std::string, FrequencyTable> frequency_table_serial(const std::vector<Explanation>& explanations,
                                                             const TokenPipelineConfig& config) {
    if (explanations.empty()) throw Error(ErrorCode::InvalidArgument, "no explanations to count");
    const auto filter = stemmed_filter(config);
    std::map<std::string, FrequencyTable> tables;
    for (const auto& [group, text] : explanations) {
        auto& table = tables[group];
        table.group = group;
        count_tokens(tokenize_with(text, config, filter), table);
    }
    return tables;
}

std::map<std::string, FrequencyTable> frequency_table(const std::vector<Explanation>& explanations,
                                                      const TokenPipelineConfig& config) {
    if (explanations.empty()) throw Error(ErrorCode::InvalidArgument, "no explanations to count");
    const auto filter = stemmed_filter(config);

    int threads = 1;
#ifdef _OPENMP
    threads = omp_get_max_threads();
#endif
    std::vector<std::map<std::string, FrequencyTable>> partial(static_cast<std::size_t>(threads));
    const auto n = static_cast<std::int64_t>(explanations.size());

#pragma omp parallel num_threads(threads) if (n > 64)
    {
        int tid = 0;
#ifdef _OPENMP
        tid = omp_get_thread_num();
#endif
        auto& local = partial[static_cast<std::size_t>(tid)];
#pragma omp for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) {
            const auto& [group, text] = explanations[static_cast<std::size_t>(i)];
            count_tokens(tokenize_with(text, config, filter), local[group]);
        }
    }

    std::map<std::string, FrequencyTable> tables;
    for (const auto& [group, _] : explanations) tables[group].group = group;
    for (const auto& local : partial)
        for (const auto& [group, t] : local) merge_into(tables[group], t);
    return tables;
}

std::vector<std::pair<std::string, std::int64_t>> wordcloud_entries(const FrequencyTable& table) {
    std::vector<std::pair<std::string, std::int64_t>> entries(table.unigrams.begin(), table.unigrams.end());
    entries.insert(entries.end(), table.bigrams.begin(), table.bigrams.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    return entries;
}

void export_wordcloud_data(const FrequencyTable& table, const std::filesystem::path& path) {
    if (table.empty()) throw Error(ErrorCode::EmptySelection, "frequency table for '" + table.group + "' is empty");
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [gram, count] : wordcloud_entries(table)) j[gram] = count;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::IoFailure, "write failed on " + path.string());
}

NegationProfile negation_profile(const Article& real, const Article& fake, const std::set<std::string>& lexicon,
                                 const TokenPipelineConfig& config) {
    if (!fake.source_id || *fake.source_id != real.id)
        throw Error(ErrorCode::UnpairedArticles, "article " + fake.id + " was not generated from " + real.id);
    std::set<std::string> lowered;
    for (const auto& w : lexicon) {
        std::string t = w;
        for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        lowered.insert(std::move(t));
    }
    auto hits = [&](const std::string& text) {
        std::int64_t n = 0;
        for (const auto& tok : raw_tokens(text, config)) n += lowered.count(tok) ? 1 : 0;
        return n;
    };
    return {fake.id, real.id, hits(real.text), hits(fake.text), lexicon};
}

void write_negation_csv(const std::vector<NegationProfile>& profiles, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out << "pair_id,real_id,negation_marker_count_real,negation_marker_count_fake\n";
    for (const auto& p : profiles)
        out << p.pair_id << ',' << p.real_id << ',' << p.negation_marker_count_real << ','
            << p.negation_marker_count_fake << '\n';
    if (!out) throw Error(ErrorCode::IoFailure, "write failed on " + path.string());
}

nlohmann::json to_json(const FrequencyTable& t) {
    return {{"group", t.group}, {"token_count", t.token_count}, {"unigrams", t.unigrams}, {"bigrams", t.bigrams}};
}

}  // namespace newsforge
