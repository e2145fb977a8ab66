#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

namespace newsforge {

enum class StrategyId { VLPrompt, Summary, QA, QAS, AbRole, AbSem };

inline constexpr std::array<StrategyId, 6> kAllStrategies = {
    StrategyId::VLPrompt, StrategyId::Summary, StrategyId::QA,
    StrategyId::QAS,      StrategyId::AbRole,  StrategyId::AbSem};

/// Canonical upper-case name ("VLPROMPT", "QA_S", ...).
std::string_view to_string(StrategyId id);
/// Case-insensitive; accepts "vlprompt", "qa_s", "qa-s", "ab_role", ...
std::optional<StrategyId> parse_strategy(std::string_view text);

inline bool is_qa_family(StrategyId id) { return id == StrategyId::QA || id == StrategyId::QAS; }

enum class Category { Real, HumanFake, Generated };

std::string_view to_string(Category c);
std::optional<Category> parse_category(std::string_view text);

/// Ground-truth label of a news item; "fake" is the positive class.
enum class NewsLabel { Real, Fake };

std::string_view to_string(NewsLabel label);
std::optional<NewsLabel> parse_label(std::string_view text);

inline NewsLabel label_of(Category c) { return c == Category::Real ? NewsLabel::Real : NewsLabel::Fake; }

struct Article {
    std::string id;
    std::string text;
    std::optional<std::string> title;
    Category category = Category::Real;
    std::optional<StrategyId> strategy;
    std::optional<std::string> model_name;
    std::optional<std::string> source_id;
    std::optional<std::string> published_date;  // ISO yyyy-mm-dd
    std::optional<std::string> origin;
    std::optional<std::string> qualification_explanation;

    /// Checks the category/provenance coupling. Throws
    /// Error(CategoryFieldConflict).
    void validate_provenance() const;

    /// Generation group label: "<STRATEGY>@<model>" for generated items,
    /// the category name otherwise.
    std::string group() const;

    bool operator==(const Article&) const = default;
};

nlohmann::json to_json(const Article& a);
/// Parses one JSONL record. Missing "text" or wrongly typed fields throw
/// Error(MalformedLine) with `where` in the message.
Article article_from_json(const nlohmann::json& j, std::string_view where);

}  // namespace newsforge
