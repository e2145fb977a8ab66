#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "newsforge/article.hpp"

namespace newsforge {

inline constexpr int kCorpusFormatVersion = 1;

/// Counts per category and per generation strategy.
struct CorpusManifest {
    std::map<std::string, std::int64_t> category_counts;
    std::map<std::string, std::int64_t> strategy_counts;
    std::string created_at;  // ISO-8601 UTC
    int format_version = kCorpusFormatVersion;

    /// Equality of counts only; timestamps differ between runs.
    bool same_counts(const CorpusManifest& other) const {
        return category_counts == other.category_counts && strategy_counts == other.strategy_counts &&
               format_version == other.format_version;
    }
};

nlohmann::json to_json(const CorpusManifest& m);

struct ArticleFilter {
    std::optional<std::set<Category>> categories;
    std::optional<StrategyId> strategy;
    std::optional<std::string> model_name;

    bool matches(const Article& a) const;
};

/// Inclusive window on published_date for human-written items.
struct DateWindow {
    std::string earliest = "2017-01-01";
    std::string latest = "2023-05-01";
};

struct ImportOptions {
    /// Keep "id" fields found in the file instead of recomputing them.
    bool preserve_ids = false;
    DateWindow date_window;
};

struct ImportResult {
    std::size_t imported = 0;
    std::size_t skipped_duplicates = 0;
};

/// Stable identifier: sha256 over NFC-normalized, whitespace-collapsed text
/// and the category. Generated items also hash their provenance so that two
/// identical generations from different sources stay distinct.
std::string content_id(const Article& a);

/// Append-only JSONL article store with an in-memory index rebuilt on open.
/// Writes are serialized; reads may run concurrently with each other.
class CorpusStore {
public:
    /// Opens (or creates on first write) the JSONL file at `path`. An empty
    /// path gives a purely in-memory store.
    explicit CorpusStore(std::filesystem::path path = {});

    /// Adds one article, assigning its id when empty. Returns false when an
    /// article with the same id is already stored.
    bool add(Article article);

    /// Imports a JSONL file. With `category` unset, each record's own
    /// "category" field is used (default real).
    ImportResult import_articles(const std::filesystem::path& path, std::optional<Category> category,
                                 const std::optional<std::string>& origin_label, const ImportOptions& options = {});

    /// Deterministic without-replacement sample of real article ids.
    std::vector<std::string> sample_sources(std::uint64_t seed, std::size_t n) const;

    /// Writes matching records to `path` and the manifest to
    /// `<path>.manifest.json`.
    CorpusManifest export_dataset(const ArticleFilter& filter, const std::filesystem::path& path) const;

    CorpusManifest manifest() const;

    const Article* find(const std::string& id) const;
    /// Throws Error(UnknownArticle).
    const Article& get(const std::string& id) const;
    std::vector<Article> select(const ArticleFilter& filter) const;
    std::size_t size() const;
    std::size_t count(Category c) const;
    const std::filesystem::path& path() const { return path_; }

private:
    bool add_locked(Article article);
    void append_line(const Article& a);
    void validate_for_store(const Article& a) const;

    std::filesystem::path path_;
    mutable std::shared_mutex mutex_;
    std::deque<Article> records_;  // deque: references stay valid across appends
    std::unordered_map<std::string, std::size_t> index_;
};

/// Shuffle with a portable generator so orders are identical across
/// standard library implementations.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

/// Current UTC time as yyyy-mm-ddThh:mm:ssZ.
std::string utc_timestamp();

}  // namespace newsforge
