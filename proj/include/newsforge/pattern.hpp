#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "newsforge/article.hpp"

namespace newsforge {

/// English function words. Contains "not" but none of the "do" forms, so
/// "does not mention" survives as "doe mention".
const std::set<std::string>& default_stopwords();
const std::set<std::string>& default_extra_filter();  // {"article", "first", "second"}
/// Heuristic negation / inversion markers; configurable.
const std::set<std::string>& default_negation_lexicon();

struct TokenPipelineConfig {
    bool lowercase = true;
    bool strip_punctuation = true;
    std::set<std::string> stopword_list = default_stopwords();
    bool stemming = true;
    /// Compared after stemming; the terms are stemmed too.
    std::set<std::string> extra_filter = default_extra_filter();
};

/// Lowercase + punctuation split only (no stopwords, no stemming).
std::vector<std::string> raw_tokens(std::string_view text, const TokenPipelineConfig& config);

/// Lowercase, split on punctuation, drop stopwords, Porter-stem, drop
/// extra_filter terms. Order preserved.
std::vector<std::string> tokenize(std::string_view text, const TokenPipelineConfig& config);

struct FrequencyTable {
    std::string group;
    std::map<std::string, std::int64_t> unigrams;
    std::map<std::string, std::int64_t> bigrams;  // "a b" for adjacent surviving tokens
    std::int64_t token_count = 0;

    bool empty() const { return unigrams.empty() && bigrams.empty(); }
    bool operator==(const FrequencyTable&) const = default;
};

using Explanation = std::pair<std::string, std::string>;  // (group, text)

/// Per-group n-gram counts (n <= 2) over tokenized explanations. Parallel
/// over explanations with per-thread partial tables.
std::map<std::string, FrequencyTable> frequency_table(const std::vector<Explanation>& explanations,
                                                      const TokenPipelineConfig& config);
/// Single-threaded reference for `frequency_table`.
std::map<std::string, FrequencyTable> frequency_table_serial(const std::vector<Explanation>& explanations,
                                                             const TokenPipelineConfig& config);

/// n-gram -> count, count descending then n-gram ascending.
std::vector<std::pair<std::string, std::int64_t>> wordcloud_entries(const FrequencyTable& table);
/// Writes the entries as one JSON object. Throws EmptySelection, IoFailure.
void export_wordcloud_data(const FrequencyTable& table, const std::filesystem::path& path);

struct NegationProfile {
    std::string pair_id;  // id of the generated article
    std::string real_id;
    std::int64_t negation_marker_count_real = 0;
    std::int64_t negation_marker_count_fake = 0;
    std::set<std::string> marker_lexicon;
};

/// Counts lexicon hits in each text after tokenization but before stopword
/// removal. Throws Error(UnpairedArticles) unless fake.source_id == real.id.
NegationProfile negation_profile(const Article& real, const Article& fake, const std::set<std::string>& lexicon,
                                 const TokenPipelineConfig& config = {});

void write_negation_csv(const std::vector<NegationProfile>& profiles, const std::filesystem::path& path);

nlohmann::json to_json(const FrequencyTable& t);

}  // namespace newsforge
