#include "newsforge/detection.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "newsforge/error.hpp"
#include "newsforge/text.hpp"

namespace newsforge {

using json = nlohmann::json;

BenchMetrics metrics_from_confusion(const Confusion& c, std::int64_t unparseable) {
    BenchMetrics m;
    m.confusion = c;
    m.unparseable_count = unparseable;
    const auto d = [](std::int64_t v) { return static_cast<double>(v); };
    if (c.total() > 0) m.acc = d(c.tp + c.tn) / d(c.total());
    if (c.tp + c.fp > 0) m.prc = d(c.tp) / d(c.tp + c.fp);
    if (c.tp + c.fn > 0) m.rcl = d(c.tp) / d(c.tp + c.fn);
    // 2PR/(P+R) == 2tp/(2tp+fp+fn); the count form avoids rounding.
    if (m.prc && m.rcl && c.tp > 0) m.f1 = d(2 * c.tp) / d(2 * c.tp + c.fp + c.fn);
    return m;
}

namespace {

NewsLabel lookup(const LabelMap& labels, const std::string& id) {
    auto it = labels.find(id);
    if (it == labels.end()) throw Error(ErrorCode::MissingLabel, "no label for article " + id);
    return it->second;
}

void tally(Confusion& c, NewsLabel truth, PredictedLabel predicted) {
    const bool said_fake = predicted == PredictedLabel::Fake;
    if (truth == NewsLabel::Fake) {
        said_fake ? ++c.tp : ++c.fn;
    } else {
        said_fake ? ++c.fp : ++c.tn;
    }
}

}  // namespace

BenchMetrics evaluate_serial(const std::vector<Prediction>& predictions, const LabelMap& labels) {
    Confusion c;
    std::int64_t unparseable = 0;
    for (const auto& p : predictions) {
        const auto truth = lookup(labels, p.article_id);
        if (p.predicted == PredictedLabel::Unparseable) {
            ++unparseable;
            continue;
        }
        tally(c, truth, p.predicted);
    }
    return metrics_from_confusion(c, unparseable);
}

BenchMetrics evaluate(const std::vector<Prediction>& predictions, const LabelMap& labels) {
    // Label lookup first so MissingLabel is raised outside the parallel region.
    std::vector<NewsLabel> truth(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i) truth[i] = lookup(labels, predictions[i].article_id);

    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0, unparseable = 0;
    const auto n = static_cast<std::int64_t>(predictions.size());
#pragma omp parallel for reduction(+ : tp, fp, fn, tn, unparseable) schedule(static) if (n > 4096)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto predicted = predictions[static_cast<std::size_t>(i)].predicted;
        if (predicted == PredictedLabel::Unparseable) {
            ++unparseable;
            continue;
        }
        const bool said_fake = predicted == PredictedLabel::Fake;
        if (truth[static_cast<std::size_t>(i)] == NewsLabel::Fake) {
            if (said_fake) ++tp; else ++fn;
        } else {
            if (said_fake) ++fp; else ++tn;
        }
    }
    return metrics_from_confusion(Confusion{tp, fp, fn, tn}, unparseable);
}

Prediction classify(const Article& incoming, const Article& example, NewsLabel example_label, Gateway& gateway,
                    const PromptTemplate& detection_template, const RenderOptions& options) {
    const auto req = render_detection_prompt(example, example_label, incoming, detection_template, options);
    ChatResponse resp;
    try {
        resp = gateway.complete(req);
    } catch (const Error& e) {
        throw Error(ErrorCode::BackendFailure, std::string("classify ") + incoming.id + ": " + e.what());
    }
    Prediction p;
    p.article_id = incoming.id;
    p.detector_name = options.model_name;
    p.predicted = parse_detection_output(resp.text);
    p.raw_output = resp.text;
    return p;
}

// ---------------------------------------------------------------------------
// Prediction files

namespace {

std::vector<std::string> split_csv_row(const std::string& line, const std::string& where) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    if (quoted) throw Error(ErrorCode::MalformedRow, where + ": unterminated quote");
    fields.push_back(std::move(field));
    return fields;
}

Prediction make_prediction(std::string id, const std::string& label, std::optional<std::string> raw,
                           const std::string& detector, const std::string& where, const CorpusStore* store) {
    id = trim(id);
    if (id.empty()) throw Error(ErrorCode::MalformedRow, where + ": empty article_id");
    const auto predicted = parse_predicted(label);
    if (!predicted) throw Error(ErrorCode::MalformedRow, where + ": predicted must be real/fake, got '" + label + "'");
    if (store && !store->find(id)) throw Error(ErrorCode::UnknownArticleId, where + ": unknown article " + id);
    Prediction p{std::move(id), *predicted, std::move(raw), detector};
    if (p.predicted == PredictedLabel::Unparseable && !p.raw_output) p.raw_output = label;
    return p;
}

}  // namespace

std::vector<Prediction> ingest_external_predictions(const std::filesystem::path& path, const CorpusStore* store) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open predictions file " + path.string());
    std::string detector = path.stem().string();
    std::vector<Prediction> out;
    std::string line;
    std::size_t line_no = 0;

    const auto ext = ascii_lower(path.extension().string());
    if (ext == ".jsonl" || ext == ".json") {
        while (std::getline(in, line)) {
            ++line_no;
            if (trim(line).empty()) continue;
            const auto where = path.string() + ":" + std::to_string(line_no);
            json j;
            try {
                j = json::parse(line);
            } catch (const json::exception& e) {
                throw Error(ErrorCode::MalformedRow, where + ": " + e.what());
            }
            if (!j.is_object()) throw Error(ErrorCode::MalformedRow, where + ": expected object");
            if (!j.contains("article_id")) {
                if (out.empty() && j.contains("detector_name") && j["detector_name"].is_string()) {
                    detector = j["detector_name"].get<std::string>();
                    continue;
                }
                throw Error(ErrorCode::MalformedRow, where + ": missing article_id");
            }
            if (!j["article_id"].is_string() || !j.contains("predicted") || !j["predicted"].is_string())
                throw Error(ErrorCode::MalformedRow, where + ": article_id and predicted must be strings");
            std::optional<std::string> raw;
            if (j.contains("raw_output") && j["raw_output"].is_string()) raw = j["raw_output"].get<std::string>();
            out.push_back(make_prediction(j["article_id"], j["predicted"], raw,
                                          j.value("detector_name", detector), where, store));
        }
        return out;
    }

    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        const auto where = path.string() + ":" + std::to_string(line_no);
        const auto t = trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            const auto colon = t.find(':');
            if (header.empty() && colon != std::string::npos && ascii_lower(trim(t.substr(1, colon - 1))) == "detector")
                detector = trim(t.substr(colon + 1));
            continue;
        }
        auto fields = split_csv_row(line, where);
        if (header.empty()) {
            for (auto& f : fields) f = ascii_lower(trim(f));
            header = std::move(fields);
            continue;
        }
        auto column = [&](const char* name) -> std::optional<std::string> {
            for (std::size_t i = 0; i < header.size(); ++i)
                if (header[i] == name) {
                    if (i >= fields.size()) throw Error(ErrorCode::MalformedRow, where + ": too few columns");
                    return fields[i];
                }
            return std::nullopt;
        };
        const auto id = column("article_id");
        const auto predicted = column("predicted");
        if (!id || !predicted) throw Error(ErrorCode::MalformedRow, where + ": header needs article_id,predicted");
        auto raw = column("raw_output");
        if (raw && raw->empty()) raw.reset();
        out.push_back(make_prediction(*id, *predicted, raw, column("detector_name").value_or(detector), where, store));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Benchmark

std::string_view to_string(BenchSplit split) {
    return split == BenchSplit::WithHumanFakes ? "with-human-fakes" : "without-human-fakes";
}

std::optional<BenchSplit> parse_split(std::string_view text) {
    const auto key = ascii_lower(text);
    if (key == "with" || key == "with-human-fakes") return BenchSplit::WithHumanFakes;
    if (key == "without" || key == "without-human-fakes") return BenchSplit::WithoutHumanFakes;
    return std::nullopt;
}

ArticleFilter split_filter(BenchSplit split) {
    ArticleFilter f;
    f.categories = split == BenchSplit::WithHumanFakes
                       ? std::set<Category>{Category::Real, Category::HumanFake, Category::Generated}
                       : std::set<Category>{Category::Real, Category::Generated};
    return f;
}

BenchReport run_benchmark(const CorpusStore& store, BenchSplit split, const DetectorSpec& detector) {
    const auto articles = store.select(split_filter(split));
    LabelMap labels;
    std::map<std::string, std::string> group_of;
    bool has_real = false, has_fake = false;
    for (const auto& a : articles) {
        labels[a.id] = label_of(a.category);
        group_of[a.id] = a.group();
        (a.category == Category::Real ? has_real : has_fake) = true;
    }
    if (!has_real || !has_fake)
        throw Error(ErrorCode::SingleClassSelection,
                    "split " + std::string(to_string(split)) + " does not contain both real and fake articles");

    BenchReport report;
    report.detector_name = detector.name;
    report.split = split;

    if (detector.predictions) {
        for (const auto& p : *detector.predictions)
            if (labels.count(p.article_id)) report.predictions.push_back(p);
        if (report.detector_name.empty() && !report.predictions.empty())
            report.detector_name = report.predictions.front().detector_name;
    } else if (detector.prompt) {
        const auto& pd = *detector.prompt;
        if (!pd.gateway || !pd.detection_template)
            throw Error(ErrorCode::InvalidArgument, "prompt detector needs a gateway and a detection template");
        const Article& exemplar = store.get(pd.exemplar_id);
        std::vector<const Article*> targets;
        for (const auto& a : articles)
            if (a.id != exemplar.id) targets.push_back(&a);
        RenderOptions opts;
        opts.model_name = pd.model_name;
        std::vector<std::optional<Prediction>> results(targets.size());
        std::optional<std::string> failure;
        const auto n = static_cast<std::int64_t>(targets.size());
#pragma omp parallel for num_threads(pd.parallelism) schedule(dynamic) if (pd.parallelism > 1)
        for (std::int64_t i = 0; i < n; ++i) {
            try {
                results[static_cast<std::size_t>(i)] = classify(*targets[static_cast<std::size_t>(i)], exemplar,
                                                                pd.exemplar_label, *pd.gateway,
                                                                *pd.detection_template, opts);
            } catch (const std::exception& e) {
#pragma omp critical(newsforge_bench_failure)
                if (!failure) failure = e.what();
            }
        }
        if (failure) throw Error(ErrorCode::BackendFailure, *failure);
        for (auto& r : results) report.predictions.push_back(std::move(*r));
        if (report.detector_name.empty()) report.detector_name = pd.model_name;
    } else {
        throw Error(ErrorCode::InvalidArgument, "detector spec has neither predictions nor a prompt detector");
    }

    std::set<std::string> predicted_ids;
    for (const auto& p : report.predictions) predicted_ids.insert(p.article_id);
    if (detector.prompt) predicted_ids.insert(detector.prompt->exemplar_id);  // never classified
    for (const auto& [id, _] : labels)
        if (!predicted_ids.count(id)) ++report.missing_predictions;

    report.overall = evaluate(report.predictions, labels);

    std::map<std::string, std::vector<Prediction>> by_group;
    std::vector<Prediction> reals;
    for (const auto& p : report.predictions) {
        if (labels.at(p.article_id) == NewsLabel::Real) {
            reals.push_back(p);
        } else {
            by_group[group_of.at(p.article_id)].push_back(p);
        }
    }
    for (auto& [group, preds] : by_group) {
        preds.insert(preds.end(), reals.begin(), reals.end());
        report.per_group[group] = evaluate(preds, labels);
    }
    return report;
}

json to_json(const BenchMetrics& m) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return {{"acc", opt(m.acc)},
            {"f1", opt(m.f1)},
            {"prc", opt(m.prc)},
            {"rcl", opt(m.rcl)},
            {"confusion", {{"tp", m.confusion.tp}, {"fp", m.confusion.fp}, {"fn", m.confusion.fn}, {"tn", m.confusion.tn}}},
            {"unparseable_count", m.unparseable_count}};
}

json to_json(const BenchReport& r) {
    json groups = json::object();
    for (const auto& [g, m] : r.per_group) groups[g] = to_json(m);
    return {{"detector_name", r.detector_name},
            {"split", to_string(r.split)},
            {"overall", to_json(r.overall)},
            {"per_group", std::move(groups)},
            {"prediction_count", r.predictions.size()},
            {"missing_predictions", r.missing_predictions}};
}

std::string format_table(const BenchReport& r) {
    std::ostringstream out;
    auto cell = [](const std::optional<double>& v) {
        char buf[16];
        if (v) {
            std::snprintf(buf, sizeof buf, "%7.3f", *v);
        } else {
            std::snprintf(buf, sizeof buf, "%7s", "-");
        }
        return std::string(buf);
    };
    char head[160];
    std::snprintf(head, sizeof head, "%-28s %7s %7s %7s %7s %7s %7s\n", "Detector / group", "ACC", "F1", "PRC", "RCL", "N",
                  "Unparse");
    out << "split: " << to_string(r.split) << "\n" << head;
    auto row = [&](const std::string& name, const BenchMetrics& m) {
        char prefix[40];
        std::snprintf(prefix, sizeof prefix, "%-28.28s", name.c_str());
        char tail[40];
        std::snprintf(tail, sizeof tail, " %7lld %7lld\n", static_cast<long long>(m.confusion.total()),
                      static_cast<long long>(m.unparseable_count));
        out << prefix << ' ' << cell(m.acc) << ' ' << cell(m.f1) << ' ' << cell(m.prc) << ' ' << cell(m.rcl) << tail;
    };
    row(r.detector_name.empty() ? "overall" : r.detector_name, r.overall);
    for (const auto& [g, m] : r.per_group) row("  " + g, m);
    return out.str();
}

}  // namespace newsforge
