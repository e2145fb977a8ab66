#include "newsforge/strategy.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "newsforge/error.hpp"
#include "newsforge/text.hpp"

namespace newsforge {

using json = nlohmann::json;

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

bool is_identifier(std::string_view s) {
    if (s.empty() || !is_ident_start(s.front())) return false;
    return std::all_of(s.begin(), s.end(), is_ident_char);
}

struct Segment {
    enum class Kind { Literal, Placeholder, BlockOpen, BlockClose } kind;
    std::string value;
};

std::vector<Segment> lex(std::string_view t) {
    std::vector<Segment> out;
    std::string buf;
    auto flush = [&] {
        if (!buf.empty()) out.push_back({Segment::Kind::Literal, std::move(buf)});
        buf.clear();
    };
    std::size_t i = 0;
    const std::size_t n = t.size();
    while (i < n) {
        const char c = t[i];
        if (c == '{' && i + 1 < n && t[i + 1] == '{') {
            buf += '{';
            i += 2;
            continue;
        }
        if (c == '}' && i + 1 < n && t[i + 1] == '}') {
            buf += '}';
            i += 2;
            continue;
        }
        if (c == '{') {
            const auto close = t.find('}', i + 1);
            if (close != std::string_view::npos) {
                const auto inner = t.substr(i + 1, close - i - 1);
                if (is_identifier(inner)) {
                    flush();
                    out.push_back({Segment::Kind::Placeholder, std::string(inner)});
                    i = close + 1;
                    continue;
                }
                if (inner.size() > 1 && (inner[0] == '#' || inner[0] == '/') && is_identifier(inner.substr(1))) {
                    // A marker alone on its line takes the whole line with it.
                    const auto line_start = t.rfind('\n', i) == std::string_view::npos ? 0 : t.rfind('\n', i) + 1;
                    auto line_end = t.find('\n', close + 1);
                    if (line_end == std::string_view::npos) line_end = n;
                    auto blank = [](std::string_view s) {
                        return s.find_first_not_of(" \t\r") == std::string_view::npos;
                    };
                    const bool alone =
                        blank(t.substr(line_start, i - line_start)) && blank(t.substr(close + 1, line_end - close - 1));
                    if (alone) {
                        while (!buf.empty() && (buf.back() == ' ' || buf.back() == '\t')) buf.pop_back();
                    }
                    flush();
                    out.push_back({inner[0] == '#' ? Segment::Kind::BlockOpen : Segment::Kind::BlockClose,
                                   std::string(inner.substr(1))});
                    i = alone ? std::min(line_end + 1, n) : close + 1;
                    continue;
                }
            }
        }
        buf += c;
        ++i;
    }
    flush();
    return out;
}

std::set<std::string> block_names(const std::vector<Segment>& segments) {
    std::set<std::string> names;
    for (const auto& s : segments)
        if (s.kind == Segment::Kind::BlockOpen) names.insert(s.value);
    return names;
}

TemplateRole parse_role(const std::string& s) {
    if (s == "generation") return TemplateRole::Generation;
    if (s == "qualification") return TemplateRole::Qualification;
    if (s == "detection") return TemplateRole::Detection;
    throw Error(ErrorCode::TemplateInvalid, "unknown template role '" + s + "'");
}

// ---- output parsing helpers ------------------------------------------------

std::size_t skip_decoration(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '#' || line[i] == '*' ||
                               line[i] == '-' || line[i] == '>' || line[i] == '_' || line[i] == '`'))
        ++i;
    return i;
}

/// If `line` opens with `label`, returns the offset where the section
/// content starts on that line.
std::optional<std::size_t> match_label(std::string_view line, std::string_view label) {
    const auto start = skip_decoration(line);
    if (line.size() - start < label.size()) return std::nullopt;
    if (ascii_lower(line.substr(start, label.size())) != ascii_lower(label)) return std::nullopt;
    auto pos = start + label.size();
    if (pos < line.size() && is_alnum(line[pos])) return std::nullopt;
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == ':' || line[pos] == '.' ||
                                 line[pos] == ')' || line[pos] == ']' || line[pos] == '*' || line[pos] == '_' ||
                                 line[pos] == '-'))
        ++pos;
    return pos;
}

std::regex marker_regex(std::string_view marker) {
    std::string pattern = "(?:^|[^A-Za-z0-9])";
    for (std::size_t i = 0; i < marker.size(); ++i) {
        const char c = marker[i];
        if (i > 0 && is_alpha(marker[i - 1]) && std::isdigit(static_cast<unsigned char>(c))) pattern += "\\s*";
        if (c == ' ') {
            pattern += "\\s*";
        } else if (is_alnum(c)) {
            pattern += c;
        } else {
            pattern += '\\';
            pattern += c;
        }
    }
    pattern += "\\s*\\**\\s*[:=]\\s*\\**\\s*(.*)$";
    return std::regex(pattern, std::regex::icase);
}

std::optional<std::string> extract_answer(const std::vector<std::string>& lines, std::string_view marker) {
    const auto re = marker_regex(marker);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::smatch m;
        if (!std::regex_search(lines[i], m, re)) continue;
        auto value = trim(m[1].str());
        for (std::size_t k = i + 1; value.empty() && k < lines.size(); ++k) value = trim(lines[k]);
        if (!value.empty()) return value;
    }
    return std::nullopt;
}

std::size_t word_count(std::string_view s) {
    std::size_t words = 0;
    bool in_word = false;
    for (char c : s) {
        const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_word) ++words;
        in_word = !space;
    }
    return words;
}

constexpr std::size_t kRefusalMaxWords = 150;

}  // namespace

std::string_view to_string(TemplateRole role) {
    switch (role) {
        case TemplateRole::Generation: return "generation";
        case TemplateRole::Qualification: return "qualification";
        case TemplateRole::Detection: return "detection";
    }
    return "generation";
}

std::string_view to_string(PredictedLabel label) {
    switch (label) {
        case PredictedLabel::Real: return "real";
        case PredictedLabel::Fake: return "fake";
        case PredictedLabel::Unparseable: return "unparseable";
    }
    return "unparseable";
}

std::optional<PredictedLabel> parse_predicted(std::string_view text) {
    const auto key = ascii_lower(trim(text));
    if (key == "real") return PredictedLabel::Real;
    if (key == "fake") return PredictedLabel::Fake;
    if (key == "unparseable") return PredictedLabel::Unparseable;
    return std::nullopt;
}

std::optional<std::size_t> expected_step_count(StrategyId strategy) {
    switch (strategy) {
        case StrategyId::VLPrompt: return 4;
        case StrategyId::AbRole: return 3;
        case StrategyId::AbSem: return 4;
        case StrategyId::QA:
        case StrategyId::QAS: return 5;
        case StrategyId::Summary: return std::nullopt;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// PromptTemplate

std::set<std::string> PromptTemplate::placeholders() const {
    std::set<std::string> names;
    for (const auto& s : lex(system_text))
        if (s.kind == Segment::Kind::Placeholder) names.insert(s.value);
    return names;
}

void PromptTemplate::validate() const {
    const auto segments = lex(system_text);
    std::optional<std::string> open;
    for (const auto& s : segments) {
        if (s.kind == Segment::Kind::BlockOpen) {
            if (open) throw Error(ErrorCode::TemplateInvalid, "nested block '" + s.value + "' inside '" + *open + "'");
            open = s.value;
        } else if (s.kind == Segment::Kind::BlockClose) {
            if (!open || *open != s.value)
                throw Error(ErrorCode::TemplateInvalid, "unbalanced block close '" + s.value + "'");
            open.reset();
        }
    }
    if (open) throw Error(ErrorCode::TemplateInvalid, "unterminated block '" + *open + "'");

    const auto names = placeholders();
    for (const auto& req : required_placeholders)
        if (!names.count(req))
            throw Error(ErrorCode::TemplateInvalid, "required placeholder {" + req + "} not in template text");

    const auto blocks = block_names(segments);
    std::set<std::string> labels;
    for (const auto& step : steps) {
        if (step.label.empty()) throw Error(ErrorCode::TemplateInvalid, "empty step label");
        if (!labels.insert(step.label).second)
            throw Error(ErrorCode::TemplateInvalid, "duplicate step label '" + step.label + "'");
        if (system_text.find(step.label) == std::string::npos)
            throw Error(ErrorCode::TemplateInvalid, "step label '" + step.label + "' not in template text");
        if (step.block && !blocks.count(*step.block))
            throw Error(ErrorCode::TemplateInvalid, "step '" + step.label + "' refers to unknown block");
    }
    if (article_step && !labels.count(*article_step))
        throw Error(ErrorCode::TemplateInvalid, "article_step '" + *article_step + "' is not a declared step");

    switch (role) {
        case TemplateRole::Generation:
            if (variants.empty()) throw Error(ErrorCode::TemplateInvalid, "generation template declares no strategy");
            for (const auto& [strategy, variant] : variants) {
                for (const auto& b : variant.exclude_blocks)
                    if (!blocks.count(b))
                        throw Error(ErrorCode::TemplateInvalid, "variant excludes unknown block '" + b + "'");
                if (auto expected = expected_step_count(strategy);
                    expected && declared_steps(strategy).size() != *expected)
                    throw Error(ErrorCode::TemplateInvalid,
                                std::string(to_string(strategy)) + " must declare " + std::to_string(*expected) +
                                    " steps, found " + std::to_string(declared_steps(strategy).size()));
            }
            break;
        case TemplateRole::Detection:
            for (const char* req : {"example_article", "example_label"})
                if (!names.count(req))
                    throw Error(ErrorCode::TemplateInvalid, std::string("detection template needs {") + req + "}");
            break;
        case TemplateRole::Qualification:
            break;
    }
}

std::vector<std::string> PromptTemplate::declared_steps(std::optional<StrategyId> strategy) const {
    std::set<std::string> excluded;
    if (strategy) {
        if (auto it = variants.find(*strategy); it != variants.end()) excluded = it->second.exclude_blocks;
    }
    std::vector<std::string> out;
    for (const auto& step : steps)
        if (!step.block || !excluded.count(*step.block)) out.push_back(step.label);
    return out;
}

std::string PromptTemplate::render_text(std::optional<StrategyId> strategy,
                                        const std::map<std::string, std::string>& extra) const {
    std::map<std::string, std::string> values = defaults;
    std::set<std::string> excluded;
    if (strategy) {
        if (auto it = variants.find(*strategy); it != variants.end()) {
            for (const auto& [k, v] : it->second.variables) values[k] = v;
            excluded = it->second.exclude_blocks;
        }
    }
    for (const auto& [k, v] : extra) values[k] = v;

    std::string out;
    std::set<std::string> missing;
    bool skipping = false;
    for (const auto& s : lex(system_text)) {
        switch (s.kind) {
            case Segment::Kind::BlockOpen:
                skipping = excluded.count(s.value) != 0;
                break;
            case Segment::Kind::BlockClose:
                skipping = false;
                break;
            case Segment::Kind::Literal:
                if (!skipping) out += s.value;
                break;
            case Segment::Kind::Placeholder:
                if (skipping) break;
                if (auto it = values.find(s.value); it != values.end()) {
                    out += it->second;
                } else {
                    missing.insert(s.value);
                }
                break;
        }
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "{" : ", {") + m + "}";
        throw Error(ErrorCode::MissingPlaceholder, "no value for " + list);
    }
    return out;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& manifest_path) {
    std::ifstream mf(manifest_path);
    if (!mf) throw Error(ErrorCode::IoFailure, "cannot open template manifest " + manifest_path.string());
    json m;
    try {
        m = json::parse(mf);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::TemplateInvalid, manifest_path.string() + ": " + e.what());
    }

    PromptTemplate t;
    try {
        t.role = parse_role(m.value("role", std::string{"generation"}));
        auto text_path = manifest_path.parent_path() /
                         m.value("template_file", manifest_path.stem().string() + ".txt");
        std::ifstream tf(text_path, std::ios::binary);
        if (!tf) throw Error(ErrorCode::IoFailure, "cannot open template text " + text_path.string());
        std::ostringstream ss;
        ss << tf.rdbuf();
        t.system_text = ss.str();

        for (const auto& p : m.value("required_placeholders", json::array())) t.required_placeholders.insert(p.get<std::string>());
        for (const auto& s : m.value("steps", json::array())) {
            if (s.is_string()) {
                t.steps.push_back({s.get<std::string>(), std::nullopt});
            } else {
                StepSpec step{s.at("label").get<std::string>(), std::nullopt};
                if (s.contains("block")) step.block = s.at("block").get<std::string>();
                t.steps.push_back(std::move(step));
            }
        }
        const json strategies = m.value("strategies", json::object());
        for (const auto& [name, v] : strategies.items()) {
            auto id = parse_strategy(name);
            if (!id) throw Error(ErrorCode::TemplateInvalid, "unknown strategy '" + name + "'");
            StrategyVariant variant;
            const json variables = v.value("variables", json::object());
            for (const auto& [k, val] : variables.items())
                variant.variables[k] = val.get<std::string>();
            for (const auto& b : v.value("exclude_blocks", json::array())) variant.exclude_blocks.insert(b.get<std::string>());
            t.variants[*id] = std::move(variant);
        }
        const json defaults = m.value("defaults", json::object());
        for (const auto& [k, val] : defaults.items()) t.defaults[k] = val.get<std::string>();
        if (m.contains("article_step")) t.article_step = m.at("article_step").get<std::string>();
        t.answer1_marker = m.value("answer1_marker", t.answer1_marker);
        t.answer2_marker = m.value("answer2_marker", t.answer2_marker);
        if (m.contains("refusal_markers")) {
            t.refusal_markers.clear();
            for (const auto& r : m.at("refusal_markers")) t.refusal_markers.push_back(ascii_lower(r.get<std::string>()));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::TemplateInvalid, manifest_path.string() + ": " + e.what());
    }
    t.validate();
    return t;
}

// ---------------------------------------------------------------------------
// TemplateSet

TemplateSet TemplateSet::load_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw Error(ErrorCode::TemplateMissing, "template directory not found: " + dir.string());
    std::vector<std::filesystem::path> manifests;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json") manifests.push_back(entry.path());
    std::sort(manifests.begin(), manifests.end());
    TemplateSet set;
    for (const auto& p : manifests) set.add(PromptTemplate::load(p));
    return set;
}

void TemplateSet::add(PromptTemplate t) {
    for (const auto& existing : templates_) {
        if (existing.role != t.role) continue;
        if (t.role != TemplateRole::Generation)
            throw Error(ErrorCode::TemplateInvalid, "duplicate " + std::string(to_string(t.role)) + " template");
        for (const auto& [strategy, _] : t.variants)
            if (existing.supports(strategy))
                throw Error(ErrorCode::TemplateInvalid,
                            "two templates serve strategy " + std::string(to_string(strategy)));
    }
    templates_.push_back(std::move(t));
}

bool TemplateSet::has_generation(StrategyId strategy) const {
    return std::any_of(templates_.begin(), templates_.end(), [&](const PromptTemplate& t) {
        return t.role == TemplateRole::Generation && t.supports(strategy);
    });
}

const PromptTemplate& TemplateSet::generation(StrategyId strategy) const {
    for (const auto& t : templates_)
        if (t.role == TemplateRole::Generation && t.supports(strategy)) return t;
    throw Error(ErrorCode::TemplateMissing, "no generation template for " + std::string(to_string(strategy)));
}

const PromptTemplate& TemplateSet::qualification() const {
    for (const auto& t : templates_)
        if (t.role == TemplateRole::Qualification) return t;
    throw Error(ErrorCode::TemplateMissing, "no qualification template");
}

const PromptTemplate& TemplateSet::detection() const {
    for (const auto& t : templates_)
        if (t.role == TemplateRole::Detection) return t;
    throw Error(ErrorCode::TemplateMissing, "no detection template");
}

// ---------------------------------------------------------------------------
// Rendering

ChatRequest render_generation_prompt(StrategyId strategy, const PromptTemplate& tmpl, const Article& source,
                                     const RenderOptions& options) {
    if (tmpl.role != TemplateRole::Generation || !tmpl.supports(strategy))
        throw Error(ErrorCode::StrategyTemplateMismatch,
                    "template does not serve strategy " + std::string(to_string(strategy)));
    if (source.category != Category::Real)
        throw Error(ErrorCode::InvalidArgument, "generation source must be a real article");
    if (trim(source.text).empty()) throw Error(ErrorCode::EmptySource, "source article " + source.id + " is empty");

    ChatRequest req;
    req.system_message = tmpl.render_text(strategy, options.variables);
    req.user_messages = {source.text};
    req.temperature = kGenerationTemperature;
    req.max_output_tokens = options.max_output_tokens;
    req.model_name = options.model_name;
    return req;
}

ChatRequest render_qualification_prompt(const Article& real, std::string_view fake_candidate,
                                        const PromptTemplate& tmpl, const RenderOptions& options) {
    if (tmpl.role != TemplateRole::Qualification)
        throw Error(ErrorCode::StrategyTemplateMismatch, "not a qualification template");
    if (real.category != Category::Real)
        throw Error(ErrorCode::InvalidArgument, "qualification reference must be a real article");
    if (trim(fake_candidate).empty()) throw Error(ErrorCode::EmptyCandidate, "candidate article is empty");

    ChatRequest req;
    req.system_message = tmpl.render_text(std::nullopt, options.variables);
    req.user_messages = {real.text, std::string(fake_candidate)};
    req.temperature = kJudgeTemperature;
    req.max_output_tokens = options.max_output_tokens;
    req.model_name = options.model_name;
    return req;
}

ChatRequest render_detection_prompt(const Article& example, NewsLabel example_label, const Article& incoming,
                                    const PromptTemplate& tmpl, const RenderOptions& options) {
    if (tmpl.role != TemplateRole::Detection)
        throw Error(ErrorCode::StrategyTemplateMismatch, "not a detection template");
    if (example.id == incoming.id)
        throw Error(ErrorCode::SelfExampleError, "exemplar and incoming article are the same (" + example.id + ")");

    auto vars = options.variables;
    vars["example_article"] = example.text;
    vars["example_label"] = std::string(to_string(example_label));
    ChatRequest req;
    req.system_message = tmpl.render_text(std::nullopt, vars);
    req.user_messages = {incoming.text};
    req.temperature = kJudgeTemperature;
    req.max_output_tokens = options.max_output_tokens;
    req.model_name = options.model_name;
    return req;
}

ChatRequest render_detection_prompt(const Article& example, std::string_view example_label,
                                    const Article& incoming, const PromptTemplate& tmpl,
                                    const RenderOptions& options) {
    const auto label = parse_label(example_label);
    if (!label) throw Error(ErrorCode::InvalidLabel, "label must be 'real' or 'fake', got '" + std::string(example_label) + "'");
    return render_detection_prompt(example, *label, incoming, tmpl, options);
}

// ---------------------------------------------------------------------------
// Parsing

GenerationOutcome parse_generation_output(StrategyId strategy, const PromptTemplate& tmpl, std::string_view raw) {
    if (trim(raw).empty()) throw Error(ErrorCode::UnparseableOutput, "empty model output");

    const auto labels = tmpl.declared_steps(strategy);
    const auto lines = split_lines(raw);

    struct Section {
        std::string label;
        std::string body;
    };
    std::vector<Section> sections;
    std::set<std::string> seen;
    for (const auto& line : lines) {
        bool opened = false;
        for (const auto& label : labels) {
            if (seen.count(label)) continue;
            if (auto content = match_label(line, label)) {
                sections.push_back({label, line.substr(*content)});
                seen.insert(label);
                opened = true;
                break;
            }
        }
        if (opened || sections.empty()) continue;
        auto& body = sections.back().body;
        if (!body.empty()) body += '\n';
        body += line;
    }

    GenerationOutcome outcome;
    for (const auto& s : sections) outcome.step_outputs[s.label] = trim(s.body);

    if (sections.empty()) {
        outcome.article_text = trim(raw);
    } else if (tmpl.article_step && !outcome.step_outputs[*tmpl.article_step].empty()) {
        outcome.article_text = outcome.step_outputs[*tmpl.article_step];
    } else {
        outcome.article_text = trim(sections.back().body);
    }
    if (tmpl.article_step && outcome.step_outputs.count(*tmpl.article_step) &&
        outcome.step_outputs[*tmpl.article_step].empty())
        outcome.step_outputs.erase(*tmpl.article_step);

    if (outcome.article_text.empty()) throw Error(ErrorCode::UnparseableOutput, "no article body found");
    const auto lowered = ascii_lower(outcome.article_text);
    for (const auto& marker : tmpl.refusal_markers) {
        if (lowered.rfind(marker, 0) == 0 && word_count(outcome.article_text) < kRefusalMaxWords)
            throw Error(ErrorCode::UnparseableOutput, "model refused: " + outcome.article_text.substr(0, 80));
    }

    outcome.answer1 = extract_answer(lines, tmpl.answer1_marker);
    outcome.answer2 = extract_answer(lines, tmpl.answer2_marker);
    if (is_qa_family(strategy) && (!outcome.answer1 || !outcome.answer2))
        throw Error(ErrorCode::MissingAnswer, std::string(to_string(strategy)) + " output lacks " +
                                                  (!outcome.answer1 ? tmpl.answer1_marker : tmpl.answer2_marker));
    return outcome;
}

QualificationVerdict parse_qualification_output(std::string_view raw) {
    std::size_t b = 0;
    while (b < raw.size() && !is_alpha(raw[b])) ++b;
    std::size_t e = b;
    while (e < raw.size() && is_alpha(raw[e])) ++e;
    const auto token = ascii_lower(raw.substr(b, e - b));
    if (token != "yes" && token != "no")
        throw Error(ErrorCode::AmbiguousVerdict, "verdict token '" + token + "' is neither yes nor no");

    QualificationVerdict v;
    v.qualified = token == "yes";
    v.raw = std::string(raw);
    std::size_t rest = e;
    while (rest < raw.size() &&
           (std::ispunct(static_cast<unsigned char>(raw[rest])) || std::isspace(static_cast<unsigned char>(raw[rest]))))
        ++rest;
    v.explanation = trim(raw.substr(rest));
    return v;
}

QualificationVerdict parse_qualification_lenient(std::string_view raw) {
    try {
        return parse_qualification_output(raw);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::AmbiguousVerdict) throw;
        return {false, "", std::string(raw)};
    }
}

PredictedLabel parse_detection_output(std::string_view raw) {
    std::size_t i = 0;
    while (i < raw.size()) {
        while (i < raw.size() && !is_alnum(raw[i])) ++i;
        std::size_t e = i;
        while (e < raw.size() && is_alnum(raw[e])) ++e;
        const auto word = ascii_lower(raw.substr(i, e - i));
        if (word == "real") return PredictedLabel::Real;
        if (word == "fake") return PredictedLabel::Fake;
        i = e;
    }
    return PredictedLabel::Unparseable;
}

}  // namespace newsforge
