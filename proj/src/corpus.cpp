#include "newsforge/corpus.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <mutex>
#include <random>
#include <regex>

#include <nlohmann/json.hpp>

#include "newsforge/error.hpp"
#include "newsforge/text.hpp"

namespace newsforge {

using json = nlohmann::json;

namespace {

bool valid_iso_date(const std::string& d) {
    static const std::regex re(R"(^\d{4}-(0[1-9]|1[0-2])-(0[1-9]|[12]\d|3[01])$)");
    return std::regex_match(d, re);
}

}  // namespace

json to_json(const CorpusManifest& m) {
    return {{"category_counts", m.category_counts},
            {"strategy_counts", m.strategy_counts},
            {"created_at", m.created_at},
            {"format_version", m.format_version}};
}

bool ArticleFilter::matches(const Article& a) const {
    if (categories && !categories->count(a.category)) return false;
    if (strategy && a.strategy != strategy) return false;
    if (model_name && a.model_name != model_name) return false;
    return true;
}

std::string content_id(const Article& a) {
    std::string key = collapse_whitespace(nfc(a.text));
    key += '\x1f';
    key += to_string(a.category);
    if (a.category == Category::Generated) {
        key += '\x1f';
        key += a.strategy ? to_string(*a.strategy) : "";
        key += '\x1f';
        key += a.model_name.value_or("");
        key += '\x1f';
        key += a.source_id.value_or("");
    }
    return sha256_hex(key).substr(0, 16);
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    // Fisher-Yates with rejection sampling; std::uniform_int_distribution is
    // not specified bit-exactly across standard libraries.
    for (std::size_t i = n; i > 1; --i) {
        const std::uint64_t bound = i;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t r;
        do {
            r = rng();
        } while (r >= limit);
        std::swap(order[i - 1], order[r % bound]);
    }
    return order;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// ---------------------------------------------------------------------------

CorpusStore::CorpusStore(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.empty() || !std::filesystem::exists(path_)) return;
    std::ifstream in(path_);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot read corpus " + path_.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::MalformedLine, path_.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        auto a = article_from_json(j, path_.string() + ":" + std::to_string(line_no));
        if (a.id.empty()) a.id = content_id(a);
        if (index_.count(a.id)) continue;
        index_[a.id] = records_.size();
        records_.push_back(std::move(a));
    }
}

void CorpusStore::validate_for_store(const Article& a) const {
    a.validate_provenance();
    if (trim(a.text).empty()) throw Error(ErrorCode::InvalidArgument, "article text is empty");
    if (a.category == Category::Generated) {
        auto it = index_.find(*a.source_id);
        if (it == index_.end() || records_[it->second].category != Category::Real)
            throw Error(ErrorCode::UnknownArticle, "source_id " + *a.source_id + " is not a stored real article");
    }
}

void CorpusStore::append_line(const Article& a) {
    if (path_.empty()) return;
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot append to corpus " + path_.string());
    out << to_json(a).dump() << '\n';
    if (!out) throw Error(ErrorCode::IoFailure, "write failed on " + path_.string());
}

bool CorpusStore::add_locked(Article article) {
    article.text = nfc(article.text);
    if (article.id.empty()) article.id = content_id(article);
    if (index_.count(article.id)) return false;
    validate_for_store(article);
    append_line(article);
    index_[article.id] = records_.size();
    records_.push_back(std::move(article));
    return true;
}

bool CorpusStore::add(Article article) {
    std::unique_lock lock(mutex_);
    return add_locked(std::move(article));
}

ImportResult CorpusStore::import_articles(const std::filesystem::path& path, std::optional<Category> category,
                                          const std::optional<std::string>& origin_label,
                                          const ImportOptions& options) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());

    // Validate the whole file before touching the store.
    std::vector<Article> parsed;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto where = path.string() + ":" + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::MalformedLine, where + ": " + e.what());
        }
        Article a = article_from_json(j, where);
        if (category) {
            if (j.contains("category") && a.category != *category)
                throw Error(ErrorCode::CategoryFieldConflict,
                            where + ": record category '" + std::string(to_string(a.category)) +
                                "' conflicts with import category '" + std::string(to_string(*category)) + "'");
            a.category = *category;
        }
        try {
            a.validate_provenance();
        } catch (const Error& e) {
            throw Error(ErrorCode::CategoryFieldConflict, where + ": " + e.what());
        }
        if (a.published_date) {
            if (!valid_iso_date(*a.published_date))
                throw Error(ErrorCode::MalformedLine, where + ": published_date must be yyyy-mm-dd");
            if (a.category != Category::Generated &&
                (*a.published_date < options.date_window.earliest || *a.published_date > options.date_window.latest))
                throw Error(ErrorCode::MalformedLine, where + ": published_date " + *a.published_date +
                                                          " outside " + options.date_window.earliest + ".." +
                                                          options.date_window.latest);
        }
        if (origin_label && !a.origin) a.origin = *origin_label;
        a.text = nfc(a.text);
        if (!options.preserve_ids) a.id.clear();
        parsed.push_back(std::move(a));
    }

    std::unique_lock lock(mutex_);
    // Real sources first so generated records in the same file resolve.
    std::stable_partition(parsed.begin(), parsed.end(),
                          [](const Article& a) { return a.category != Category::Generated; });
    ImportResult result;
    for (auto& a : parsed) {
        if (add_locked(std::move(a))) {
            ++result.imported;
        } else {
            ++result.skipped_duplicates;
        }
    }
    return result;
}

std::vector<std::string> CorpusStore::sample_sources(std::uint64_t seed, std::size_t n) const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> ids;
    for (const auto& a : records_)
        if (a.category == Category::Real) ids.push_back(a.id);
    if (n > ids.size())
        throw Error(ErrorCode::InsufficientPool,
                    "requested " + std::to_string(n) + " sources, pool has " + std::to_string(ids.size()));
    std::sort(ids.begin(), ids.end());
    const auto order = seeded_permutation(ids.size(), seed);
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(ids[order[i]]);
    return out;
}

CorpusManifest CorpusStore::export_dataset(const ArticleFilter& filter, const std::filesystem::path& path) const {
    const auto selected = select(filter);
    if (selected.empty()) throw Error(ErrorCode::EmptySelection, "filter matches no articles");

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    CorpusManifest m;
    m.created_at = utc_timestamp();
    for (const auto& a : selected) {
        out << to_json(a).dump() << '\n';
        ++m.category_counts[std::string(to_string(a.category))];
        if (a.strategy) ++m.strategy_counts[std::string(to_string(*a.strategy))];
    }
    out.close();
    if (!out) throw Error(ErrorCode::IoFailure, "write failed on " + path.string());

    std::ofstream mf(path.string() + ".manifest.json", std::ios::trunc);
    if (!mf) throw Error(ErrorCode::IoFailure, "cannot write manifest for " + path.string());
    mf << to_json(m).dump(2) << '\n';
    return m;
}

CorpusManifest CorpusStore::manifest() const {
    std::shared_lock lock(mutex_);
    CorpusManifest m;
    m.created_at = utc_timestamp();
    for (const auto& a : records_) {
        ++m.category_counts[std::string(to_string(a.category))];
        if (a.strategy) ++m.strategy_counts[std::string(to_string(*a.strategy))];
    }
    return m;
}

const Article* CorpusStore::find(const std::string& id) const {
    std::shared_lock lock(mutex_);
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &records_[it->second];
}

const Article& CorpusStore::get(const std::string& id) const {
    if (const auto* a = find(id)) return *a;
    throw Error(ErrorCode::UnknownArticle, "no article with id " + id);
}

std::vector<Article> CorpusStore::select(const ArticleFilter& filter) const {
    std::shared_lock lock(mutex_);
    std::vector<Article> out;
    for (const auto& a : records_)
        if (filter.matches(a)) out.push_back(a);
    return out;
}

std::size_t CorpusStore::size() const {
    std::shared_lock lock(mutex_);
    return records_.size();
}

std::size_t CorpusStore::count(Category c) const {
    std::shared_lock lock(mutex_);
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [c](const Article& a) { return a.category == c; }));
}

}  // namespace newsforge
