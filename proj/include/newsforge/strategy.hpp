#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "newsforge/article.hpp"
#include "newsforge/gateway.hpp"

namespace newsforge {

enum class TemplateRole { Generation, Qualification, Detection };

std::string_view to_string(TemplateRole role);

struct StepSpec {
    std::string label;
    /// Optional block the step lives in; the step disappears with the block.
    std::optional<std::string> block;
};

/// Per-strategy settings of a generation template: placeholder values and
/// optional blocks to drop (ablations).
struct StrategyVariant {
    std::map<std::string, std::string> variables;
    std::set<std::string> exclude_blocks;
};

/// A prompt template file plus its JSON sidecar manifest.
///
/// Template text syntax:
///   {name}            placeholder, name = [A-Za-z_][A-Za-z0-9_]*
///   {{ and }}         literal braces
///   {#block} ... {/block}
///                     optional block; a strategy variant may exclude it.
///                     A marker alone on its line is removed with its line break.
struct PromptTemplate {
    TemplateRole role = TemplateRole::Generation;
    std::string system_text;
    std::set<std::string> required_placeholders;
    std::vector<StepSpec> steps;
    std::map<StrategyId, StrategyVariant> variants;  // generation only
    std::map<std::string, std::string> defaults;
    std::optional<std::string> article_step;
    std::string answer1_marker = "Answer1";
    std::string answer2_marker = "Answer2";
    std::vector<std::string> refusal_markers = {"i'm sorry",  "i am sorry", "sorry,",   "i cannot",
                                                "i can't",    "i can not",  "as an ai", "i apologize",
                                                "i will not", "i won't"};

    /// Checks structure: placeholders, balanced blocks, step counts per
    /// strategy. Throws Error(TemplateInvalid).
    void validate() const;

    bool supports(StrategyId strategy) const { return variants.count(strategy) != 0; }

    /// Step labels that survive the strategy's block exclusions.
    std::vector<std::string> declared_steps(std::optional<StrategyId> strategy = std::nullopt) const;

    /// Expands blocks for `strategy` and fills placeholders from defaults,
    /// variant variables and `extra` (later wins). Throws MissingPlaceholder.
    std::string render_text(std::optional<StrategyId> strategy,
                            const std::map<std::string, std::string>& extra = {}) const;

    /// Placeholder names occurring anywhere in the text.
    std::set<std::string> placeholders() const;

    /// Loads `<stem>.json` with its text file (manifest key "template_file",
    /// default `<stem>.txt`).
    static PromptTemplate load(const std::filesystem::path& manifest_path);
};

/// Expected number of declared steps for strategies with a fixed structure.
std::optional<std::size_t> expected_step_count(StrategyId strategy);

/// All templates found in one directory.
class TemplateSet {
public:
    TemplateSet() = default;
    static TemplateSet load_directory(const std::filesystem::path& dir);

    void add(PromptTemplate t);

    /// Throws Error(TemplateMissing).
    const PromptTemplate& generation(StrategyId strategy) const;
    const PromptTemplate& qualification() const;
    const PromptTemplate& detection() const;

    bool has_generation(StrategyId strategy) const;

private:
    std::vector<PromptTemplate> templates_;
};

struct RenderOptions {
    std::string model_name = "default";
    int max_output_tokens = 2048;
    std::map<std::string, std::string> variables;
};

struct GenerationOutcome {
    std::string article_text;
    std::map<std::string, std::string> step_outputs;
    std::optional<std::string> answer1;
    std::optional<std::string> answer2;
};

struct QualificationVerdict {
    bool qualified = false;
    std::string explanation;
    std::string raw;
};

enum class PredictedLabel { Real, Fake, Unparseable };

std::string_view to_string(PredictedLabel label);
std::optional<PredictedLabel> parse_predicted(std::string_view text);

ChatRequest render_generation_prompt(StrategyId strategy, const PromptTemplate& tmpl, const Article& source,
                                     const RenderOptions& options = {});

GenerationOutcome parse_generation_output(StrategyId strategy, const PromptTemplate& tmpl, std::string_view raw);

ChatRequest render_qualification_prompt(const Article& real, std::string_view fake_candidate,
                                        const PromptTemplate& tmpl, const RenderOptions& options = {});

/// Throws Error(AmbiguousVerdict) when the first word is neither yes nor no.
QualificationVerdict parse_qualification_output(std::string_view raw);

/// Like parse_qualification_output, but an ambiguous verdict becomes an
/// unqualified one.
QualificationVerdict parse_qualification_lenient(std::string_view raw);

ChatRequest render_detection_prompt(const Article& example, NewsLabel example_label, const Article& incoming,
                                    const PromptTemplate& tmpl, const RenderOptions& options = {});
/// String-label overload; throws Error(InvalidLabel) outside {real, fake}.
ChatRequest render_detection_prompt(const Article& example, std::string_view example_label,
                                    const Article& incoming, const PromptTemplate& tmpl,
                                    const RenderOptions& options = {});

PredictedLabel parse_detection_output(std::string_view raw);

}  // namespace newsforge
