#include "newsforge/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "newsforge/corpus.hpp"
#include "newsforge/detection.hpp"
#include "newsforge/error.hpp"
#include "newsforge/pattern.hpp"
#include "newsforge/pipeline.hpp"
#include "newsforge/strategy.hpp"
#include "newsforge/study.hpp"
#include "newsforge/study_http.hpp"
#include "newsforge/text.hpp"

namespace newsforge {

using nlohmann::json;
namespace fs = std::filesystem;

std::string interpolate_env(const std::string& text) {
    std::string out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text.compare(i, 3, "$${") == 0) {
            out += "${";
            i += 2;
            continue;
        }
        if (text.compare(i, 2, "${") != 0) {
            out += text[i];
            continue;
        }
        const auto close = text.find('}', i + 2);
        if (close == std::string::npos) throw Error(ErrorCode::ConfigInvalid, "unterminated ${ in '" + text + "'");
        const auto name = text.substr(i + 2, close - i - 2);
        const char* value = std::getenv(name.c_str());
        if (!value) throw Error(ErrorCode::ConfigInvalid, "environment variable " + name + " is not set");
        out += value;
        i = close;
    }
    return out;
}

namespace {

json interpolate_tree(const json& j) {
    if (j.is_string()) return interpolate_env(j.get<std::string>());
    if (j.is_array()) {
        json out = json::array();
        for (const auto& v : j) out.push_back(interpolate_tree(v));
        return out;
    }
    if (j.is_object()) {
        json out = json::object();
        for (const auto& [k, v] : j.items()) out[k] = interpolate_tree(v);
        return out;
    }
    return j;
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

// Usage errors map to exit 2; everything else surfaces as module errors.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_json_file(const fs::path& path, const json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::IoFailure, "write failed on " + path.string());
}

std::string fixed3(double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(3) << v;
    return s.str();
}

std::string file_safe(std::string s) {
    for (auto& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
    return s;
}

StrategyId strategy_or_usage(const std::string& name) {
    const auto s = parse_strategy(name);
    if (!s) throw UsageError("unknown strategy '" + name + "'");
    return *s;
}

}  // namespace

AppConfig AppConfig::from_json(const json& raw, const fs::path& base_dir) {
    if (!raw.is_object()) throw Error(ErrorCode::ConfigInvalid, "config must be a JSON object");
    const auto j = interpolate_tree(raw);
    AppConfig c;
    try {
        if (!j.contains("corpus_path") || !j.at("corpus_path").is_string())
            throw Error(ErrorCode::ConfigInvalid, "config needs exactly one corpus_path string");
        c.corpus_path = resolve(base_dir, j.at("corpus_path").get<std::string>());
        c.template_dir = resolve(base_dir, j.value("template_dir", std::string("templates")));
        c.reports_dir = resolve(base_dir, j.value("reports_dir", std::string("reports")));
        c.study_dir = resolve(base_dir, j.value("study_dir", std::string("study")));
        if (j.contains("ui_dir")) c.ui_dir = resolve(base_dir, j.at("ui_dir").get<std::string>());
        if (j.contains("guidelines")) c.guidelines_path = resolve(base_dir, j.at("guidelines").get<std::string>());
        c.seed = j.value("seed", std::uint64_t{0});
        c.parallelism = j.value("parallelism", 1);
        if (c.parallelism < 1) throw Error(ErrorCode::ConfigInvalid, "parallelism must be at least 1");
        if (j.contains("backends")) {
            for (const auto& [name, block] : j.at("backends").items()) {
                auto b = BackendConfig::from_json(block, base_dir);
                b.validate();
                c.backends.emplace(name, std::move(b));
            }
        }
        c.default_backend = j.value("default_backend", c.backends.empty() ? std::string{} : c.backends.begin()->first);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigInvalid, e.what());
    }
    if (!c.default_backend.empty() && !c.backends.count(c.default_backend))
        throw Error(ErrorCode::ConfigInvalid, "default_backend '" + c.default_backend + "' is not defined");
    if (!fs::is_directory(c.template_dir))
        throw Error(ErrorCode::ConfigInvalid, "template directory " + c.template_dir.string() + " does not exist");
    if (c.guidelines_path && !fs::exists(*c.guidelines_path))
        throw Error(ErrorCode::ConfigInvalid, "guidelines file " + c.guidelines_path->string() + " does not exist");
    return c;
}

AppConfig AppConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot read config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
    }
    return from_json(j, path.has_parent_path() ? path.parent_path() : fs::current_path());
}

const BackendConfig& AppConfig::backend(const std::string& name) const {
    const auto& key = name.empty() ? default_backend : name;
    auto it = backends.find(key);
    if (it == backends.end()) throw Error(ErrorCode::ConfigInvalid, "backend '" + key + "' is not defined");
    return it->second;
}

namespace {

struct GenerateArgs {
    std::string strategy, model = "default", backend, report;
    std::size_t target = 0;
    std::optional<std::uint64_t> seed;
    std::optional<int> parallelism;
    bool strict = false;
    bool adjudicate = false;
};

struct BenchArgs {
    std::string detector, split = "with-human-fakes", predictions, report, backend, exemplar, model = "default";
};

struct AnalyzeArgs {
    std::string explanations, out_dir, negation_csv, group_by = "group";
};

struct ServeArgs {
    std::string host = "127.0.0.1";
    int port = 8080;
};

struct ImportArgs {
    std::string file, category, origin;
    bool preserve_ids = false;
};

struct ExportArgs {
    std::string out, strategy, model;
    std::vector<std::string> categories;
};

int cmd_generate(const AppConfig& cfg, const GenerateArgs& a, std::ostream& out, std::ostream& err) {
    const auto strategy = strategy_or_usage(a.strategy);
    if (a.target == 0) throw UsageError("--target must be at least 1");

    const auto templates = TemplateSet::load_directory(cfg.template_dir);
    CorpusStore store(cfg.corpus_path);
    Gateway gateway(cfg.backend(a.backend));

    RunConfig run;
    run.strategy = strategy;
    run.model_name = a.model;
    run.target_count = a.target;
    run.seed = a.seed.value_or(cfg.seed);
    run.parallelism = a.parallelism.value_or(cfg.parallelism);
    run.llm_adjudication = a.adjudicate;

    // Sources already used by this strategy and model are not drawn again.
    std::set<std::string> used;
    for (const auto& g : store.select(ArticleFilter{std::set<Category>{Category::Generated}, strategy, a.model}))
        if (g.source_id) used.insert(*g.source_id);
    for (const auto& r : store.select(ArticleFilter{std::set<Category>{Category::Real}, {}, {}}))
        if (!used.count(r.id)) run.pool.push_back(r.id);
    std::sort(run.pool.begin(), run.pool.end());
    if (run.pool.empty()) throw Error(ErrorCode::InsufficientPool, "no unused real articles to draw from");

    const auto report = run_generation(run, gateway, templates, store);
    const fs::path report_path =
        a.report.empty() ? cfg.reports_dir / ("generate-" + file_safe(std::string(to_string(strategy))) + "-" +
                                              file_safe(a.model) + "-" + std::to_string(run.seed) + ".json")
                         : fs::path(a.report);
    write_json_file(report_path, to_json(report));

    out << "strategy " << to_string(strategy) << " model " << a.model << " qualified "
        << report.cost.qualified_count << " sources_used " << report.cost.sources_used << " success_rate "
        << fixed3(report.cost.success_rate) << " avg_requests "
        << (report.cost.avg_requests ? fixed3(*report.cost.avg_requests) : std::string("n/a")) << '\n';
    out << "report " << report_path.string() << '\n';

    if (report.aborted) {
        err << "generation aborted: " << *report.aborted << '\n';
        return kExitModuleError;
    }
    if (!report.target_reached) {
        err << "target not reached: " << report.accepted_count << " of " << a.target << " (pool exhausted)\n";
        if (a.strict) return kExitTargetMissed;
    }
    return kExitOk;
}

int cmd_bench(const AppConfig& cfg, const BenchArgs& a, std::ostream& out, std::ostream&) {
    const auto split = parse_split(a.split);
    if (!split) throw UsageError("unknown split '" + a.split + "'");
    CorpusStore store(cfg.corpus_path);

    DetectorSpec spec;
    std::optional<Gateway> gateway;
    std::optional<TemplateSet> templates;
    if (!a.predictions.empty()) {
        if (!fs::exists(a.predictions)) throw UsageError("predictions file " + a.predictions + " not found");
        spec.predictions = ingest_external_predictions(a.predictions, &store);
        spec.name = a.detector;
        if (spec.name.empty() && !spec.predictions->empty()) spec.name = spec.predictions->front().detector_name;
    } else {
        if (a.exemplar.empty()) throw UsageError("bench needs --predictions or --exemplar with a backend");
        templates = TemplateSet::load_directory(cfg.template_dir);
        gateway.emplace(cfg.backend(a.backend));
        const auto& ex = store.get(a.exemplar);
        spec.prompt = PromptDetector{&*gateway, &templates->detection(), ex.id, label_of(ex.category), a.model,
                                     cfg.parallelism};
        spec.name = a.detector.empty() ? a.model : a.detector;
    }
    if (spec.name.empty()) spec.name = "detector";

    const auto report = run_benchmark(store, *split, spec);
    const fs::path report_path = a.report.empty() ? cfg.reports_dir / ("bench-" + file_safe(spec.name) + "-" +
                                                                       std::string(to_string(*split)) + ".json")
                                                  : fs::path(a.report);
    write_json_file(report_path, to_json(report));
    out << format_table(report);
    out << "report " << report_path.string() << '\n';
    return kExitOk;
}

int cmd_analyze(const AppConfig& cfg, const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
    if (a.group_by != "group" && a.group_by != "strategy") throw UsageError("--group-by must be group or strategy");
    std::vector<Explanation> explanations;
    std::optional<CorpusStore> store;
    if (!a.explanations.empty()) {
        if (!fs::exists(a.explanations)) throw UsageError("explanations file " + a.explanations + " not found");
        std::ifstream in(a.explanations);
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (trim(line).empty()) continue;
            try {
                const auto j = json::parse(line);
                explanations.emplace_back(j.at("group").get<std::string>(), j.at("text").get<std::string>());
            } catch (const json::exception& e) {
                throw Error(ErrorCode::MalformedLine, a.explanations + ":" + std::to_string(n) + ": " + e.what());
            }
        }
    } else {
        store.emplace(cfg.corpus_path);
        for (const auto& g : store->select(ArticleFilter{std::set<Category>{Category::Generated}, {}, {}})) {
            if (!g.qualification_explanation) continue;
            auto key = g.group();
            if (a.group_by == "strategy") key = key.substr(0, key.find('@'));
            explanations.emplace_back(key, *g.qualification_explanation);
        }
    }
    const TokenPipelineConfig tokens;
    const auto tables = frequency_table(explanations, tokens);

    const fs::path out_dir = a.out_dir.empty() ? cfg.reports_dir / "analysis" : fs::path(a.out_dir);
    fs::create_directories(out_dir);
    json all = json::object();
    for (const auto& [group, table] : tables) {
        all[group] = to_json(table);
        out << group << " tokens " << table.token_count << " unigrams " << table.unigrams.size() << " bigrams "
            << table.bigrams.size();
        if (table.empty()) {
            out << " (empty, no word cloud)\n";
            continue;
        }
        const auto top = wordcloud_entries(table);
        out << " top";
        for (std::size_t i = 0; i < std::min<std::size_t>(5, top.size()); ++i)
            out << ' ' << top[i].first << '=' << top[i].second;
        out << '\n';
        export_wordcloud_data(table, out_dir / ("wordcloud-" + file_safe(group) + ".json"));
    }
    write_json_file(out_dir / "frequency.json", all);

    if (!a.negation_csv.empty()) {
        if (!store) store.emplace(cfg.corpus_path);
        std::vector<NegationProfile> profiles;
        for (const auto& g : store->select(ArticleFilter{std::set<Category>{Category::Generated}, {}, {}})) {
            if (!g.source_id) continue;
            profiles.push_back(negation_profile(store->get(*g.source_id), g, default_negation_lexicon()));
        }
        write_negation_csv(profiles, a.negation_csv);
        err << "wrote " << profiles.size() << " negation profiles\n";
    }
    out << "analysis " << out_dir.string() << '\n';
    return kExitOk;
}

int cmd_serve(const AppConfig& cfg, const ServeArgs& a, std::ostream& out, std::ostream& err, const CliHooks& hooks) {
    CorpusStore store(cfg.corpus_path);
    StudyService service(store, cfg.study_dir,
                         cfg.guidelines_path ? StudyGuidelines::load(*cfg.guidelines_path) : StudyGuidelines::defaults());
    StudyHttpServer server(service, cfg.ui_dir);
    int port = a.port;
    if (port == 0) {
        port = server.bind_any_port(a.host);
        if (port < 0) throw Error(ErrorCode::IoFailure, "cannot bind " + a.host);
    } else if (!server.bind(a.host, port)) {
        throw Error(ErrorCode::IoFailure, "cannot bind " + a.host + ":" + std::to_string(port));
    }
    out << "listening on http://" << a.host << ':' << port << std::endl;
    std::thread notifier;
    if (hooks.on_listening) {
        notifier = std::thread([&] {
            server.wait_until_ready();
            hooks.on_listening(port, [&] { server.stop(); });
        });
    }
    const bool ok = server.listen_after_bind();
    if (notifier.joinable()) notifier.join();
    if (!ok) {
        err << "server stopped with an error\n";
        return kExitModuleError;
    }
    return kExitOk;
}

int cmd_import(const AppConfig& cfg, const ImportArgs& a, std::ostream& out) {
    if (!fs::exists(a.file)) throw UsageError("input file " + a.file + " not found");
    std::optional<Category> category;
    if (!a.category.empty()) {
        category = parse_category(a.category);
        if (!category) throw UsageError("unknown category '" + a.category + "'");
    }
    CorpusStore store(cfg.corpus_path);
    ImportOptions options;
    options.preserve_ids = a.preserve_ids;
    const auto r = store.import_articles(a.file, category, a.origin.empty() ? std::nullopt : std::optional(a.origin),
                                         options);
    out << "imported " << r.imported << " skipped_duplicates " << r.skipped_duplicates << " total " << store.size()
        << '\n';
    return kExitOk;
}

int cmd_export(const AppConfig& cfg, const ExportArgs& a, std::ostream& out) {
    ArticleFilter filter;
    if (!a.categories.empty()) {
        std::set<Category> cats;
        for (const auto& c : a.categories) {
            const auto parsed = parse_category(c);
            if (!parsed) throw UsageError("unknown category '" + c + "'");
            cats.insert(*parsed);
        }
        filter.categories = cats;
    }
    if (!a.strategy.empty()) filter.strategy = strategy_or_usage(a.strategy);
    if (!a.model.empty()) filter.model_name = a.model;
    CorpusStore store(cfg.corpus_path);
    const auto m = store.export_dataset(filter, a.out);
    out << "exported " << to_json(m).dump() << '\n';
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const CliHooks& hooks) {
    CLI::App app{"fake-news dataset generation, detection benchmarking and human study tooling", "newsforge"};
    app.require_subcommand(1);
    std::string config_path = "newsforge.json";
    std::string corpus_override, templates_override;
    app.add_option("-c,--config", config_path, "JSON config file");
    app.add_option("--corpus", corpus_override, "Override corpus_path");
    app.add_option("--templates", templates_override, "Override template_dir");

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Generate and qualify articles for one strategy");
    generate->add_option("--strategy", gen.strategy, "VLPROMPT, SUMMARY, QA, QA_S, AB_ROLE or AB_SEM")->required();
    generate->add_option("--model", gen.model, "Model name sent to the backend");
    generate->add_option("--target", gen.target, "Number of qualified articles wanted")->required();
    generate->add_option("--seed", gen.seed, "Sampling seed (default from config)");
    generate->add_option("--backend", gen.backend, "Backend name from the config");
    generate->add_option("--parallelism", gen.parallelism, "Attempts in flight");
    generate->add_option("--report", gen.report, "Report path");
    generate->add_flag("--strict", gen.strict, "Exit nonzero when the pool runs out before the target");
    generate->add_flag("--adjudicate", gen.adjudicate, "Judge QA answer divergence with an extra model call");

    BenchArgs bench;
    auto* bench_cmd = app.add_subcommand("bench", "Score a detector on the corpus");
    bench_cmd->add_option("--detector", bench.detector, "Detector name");
    bench_cmd->add_option("--split", bench.split, "with-human-fakes or without-human-fakes");
    bench_cmd->add_option("--predictions", bench.predictions, "CSV or JSONL predictions file");
    bench_cmd->add_option("--backend", bench.backend, "Backend for the one-shot prompt detector");
    bench_cmd->add_option("--exemplar", bench.exemplar, "Exemplar article id for the prompt detector");
    bench_cmd->add_option("--model", bench.model, "Model name for the prompt detector");
    bench_cmd->add_option("--report", bench.report, "Report path");

    AnalyzeArgs analyze;
    auto* analyze_cmd = app.add_subcommand("analyze", "Word frequencies of qualification explanations");
    analyze_cmd->add_option("--explanations", analyze.explanations, "JSONL of {group, text} (default: corpus)");
    analyze_cmd->add_option("--out-dir", analyze.out_dir, "Output directory");
    analyze_cmd->add_option("--group-by", analyze.group_by, "group or strategy");
    analyze_cmd->add_option("--negation-csv", analyze.negation_csv, "Also write negation profiles here");

    ServeArgs serve;
    auto* serve_cmd = app.add_subcommand("serve", "Run the human study server");
    serve_cmd->add_option("--host", serve.host, "Bind address");
    serve_cmd->add_option("--port", serve.port, "Port (0 = any free port)");

    ImportArgs import;
    auto* import_cmd = app.add_subcommand("import", "Import a JSONL file into the corpus");
    import_cmd->add_option("--file", import.file, "JSONL input")->required();
    import_cmd->add_option("--category", import.category, "real or human_fake (default: per record)");
    import_cmd->add_option("--origin", import.origin, "Origin label");
    import_cmd->add_flag("--preserve-ids", import.preserve_ids, "Keep ids found in the file");

    ExportArgs exp;
    auto* export_cmd = app.add_subcommand("export", "Export a filtered dataset with its manifest");
    export_cmd->add_option("--out", exp.out, "Output JSONL path")->required();
    export_cmd->add_option("--category", exp.categories, "Categories to include (repeatable)");
    export_cmd->add_option("--strategy", exp.strategy, "Only this generation strategy");
    export_cmd->add_option("--model", exp.model, "Only this model");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n' << app.help();
        return kExitUsage;
    }

    try {
        auto cfg = AppConfig::load(config_path);
        if (!corpus_override.empty()) cfg.corpus_path = corpus_override;
        if (!templates_override.empty()) cfg.template_dir = templates_override;

        if (generate->parsed()) return cmd_generate(cfg, gen, out, err);
        if (bench_cmd->parsed()) return cmd_bench(cfg, bench, out, err);
        if (analyze_cmd->parsed()) return cmd_analyze(cfg, analyze, out, err);
        if (serve_cmd->parsed()) return cmd_serve(cfg, serve, out, err, hooks);
        if (import_cmd->parsed()) return cmd_import(cfg, import, out);
        if (export_cmd->parsed()) return cmd_export(cfg, exp, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitModuleError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitModuleError;
    }
    return kExitUsage;
}

}  // namespace newsforge
