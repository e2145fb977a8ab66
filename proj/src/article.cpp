#include "newsforge/article.hpp"

#include <nlohmann/json.hpp>

#include "newsforge/error.hpp"
#include "newsforge/text.hpp"

namespace newsforge {

using json = nlohmann::json;

std::string_view to_string(StrategyId id) {
    switch (id) {
        case StrategyId::VLPrompt: return "VLPROMPT";
        case StrategyId::Summary: return "SUMMARY";
        case StrategyId::QA: return "QA";
        case StrategyId::QAS: return "QA_S";
        case StrategyId::AbRole: return "AB_ROLE";
        case StrategyId::AbSem: return "AB_SEM";
    }
    return "UNKNOWN";
}

std::optional<StrategyId> parse_strategy(std::string_view text) {
    std::string key = ascii_upper(text);
    for (auto& ch : key)
        if (ch == '-') ch = '_';
    for (auto id : kAllStrategies)
        if (key == to_string(id)) return id;
    return std::nullopt;
}

std::string_view to_string(Category c) {
    switch (c) {
        case Category::Real: return "real";
        case Category::HumanFake: return "human_fake";
        case Category::Generated: return "generated";
    }
    return "real";
}

std::optional<Category> parse_category(std::string_view text) {
    const auto key = ascii_lower(text);
    if (key == "real") return Category::Real;
    if (key == "human_fake" || key == "human-fake") return Category::HumanFake;
    if (key == "generated") return Category::Generated;
    return std::nullopt;
}

std::string_view to_string(NewsLabel label) { return label == NewsLabel::Real ? "real" : "fake"; }

std::optional<NewsLabel> parse_label(std::string_view text) {
    const auto key = ascii_lower(trim(text));
    if (key == "real") return NewsLabel::Real;
    if (key == "fake") return NewsLabel::Fake;
    return std::nullopt;
}

void Article::validate_provenance() const {
    const bool any = strategy || model_name || source_id;
    const bool all = strategy && model_name && source_id;
    if (category == Category::Generated && !all)
        throw Error(ErrorCode::CategoryFieldConflict,
                    "generated article needs strategy, model_name and source_id");
    if (category != Category::Generated && any)
        throw Error(ErrorCode::CategoryFieldConflict,
                    std::string(to_string(category)) + " article must not carry generation provenance");
}

std::string Article::group() const {
    if (category == Category::Generated && strategy)
        return std::string(to_string(*strategy)) + "@" + model_name.value_or("");
    return std::string(to_string(category));
}

json to_json(const Article& a) {
    json j;
    j["id"] = a.id;
    j["text"] = a.text;
    if (a.title) j["title"] = *a.title;
    j["category"] = to_string(a.category);
    if (a.strategy) j["strategy"] = to_string(*a.strategy);
    if (a.model_name) j["model_name"] = *a.model_name;
    if (a.source_id) j["source_id"] = *a.source_id;
    if (a.published_date) j["published_date"] = *a.published_date;
    if (a.origin) j["origin"] = *a.origin;
    if (a.qualification_explanation) j["qualification_explanation"] = *a.qualification_explanation;
    return j;
}

namespace {

std::optional<std::string> optional_string(const json& j, const char* key, std::string_view where) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    if (!j.at(key).is_string())
        throw Error(ErrorCode::MalformedLine, std::string(where) + ": field '" + key + "' must be a string");
    return j.at(key).get<std::string>();
}

}  // namespace

Article article_from_json(const json& j, std::string_view where) {
    if (!j.is_object()) throw Error(ErrorCode::MalformedLine, std::string(where) + ": expected an object");
    Article a;
    auto text = optional_string(j, "text", where);
    if (!text) throw Error(ErrorCode::MalformedLine, std::string(where) + ": missing \"text\"");
    a.text = std::move(*text);
    a.id = optional_string(j, "id", where).value_or("");
    a.title = optional_string(j, "title", where);
    if (auto c = optional_string(j, "category", where)) {
        auto parsed = parse_category(*c);
        if (!parsed) throw Error(ErrorCode::MalformedLine, std::string(where) + ": unknown category '" + *c + "'");
        a.category = *parsed;
    }
    if (auto s = optional_string(j, "strategy", where)) {
        auto parsed = parse_strategy(*s);
        if (!parsed) throw Error(ErrorCode::MalformedLine, std::string(where) + ": unknown strategy '" + *s + "'");
        a.strategy = *parsed;
    }
    a.model_name = optional_string(j, "model_name", where);
    a.source_id = optional_string(j, "source_id", where);
    a.published_date = optional_string(j, "published_date", where);
    a.origin = optional_string(j, "origin", where);
    a.qualification_explanation = optional_string(j, "qualification_explanation", where);
    return a;
}

}  // namespace newsforge
