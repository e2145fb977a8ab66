#include "newsforge/study.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "newsforge/error.hpp"
#include "newsforge/text.hpp"

namespace newsforge {

using nlohmann::json;

std::string_view to_string(StudyPhase p) { return p == StudyPhase::Authenticity ? "authenticity" : "comparison"; }

namespace {

StudyPhase parse_phase(const std::string& s) {
    if (s == "authenticity") return StudyPhase::Authenticity;
    if (s == "comparison") return StudyPhase::Comparison;
    throw Error(ErrorCode::InvalidArgument, "unknown study phase '" + s + "'");
}

std::optional<double>* metric_slot(MetricScores& s, const std::string& name) {
    if (name == "correctness") return &s.correctness;
    if (name == "neutral") return &s.neutral;
    if (name == "informative") return &s.informative;
    if (name == "consistent") return &s.consistent;
    if (name == "intention") return &s.intention;
    if (name == "detail") return &s.detail;
    return nullptr;
}

std::vector<std::pair<std::string, std::optional<double>>> metric_values(const MetricScores& s) {
    return {{"correctness", s.correctness}, {"neutral", s.neutral},     {"informative", s.informative},
            {"consistent", s.consistent},   {"intention", s.intention}, {"detail", s.detail}};
}

bool on_detail_scale(double v) {
    return std::any_of(std::begin(kDetailScale), std::end(kDetailScale), [&](double s) { return v == s; });
}

std::string strategy_part(const std::string& group) { return group.substr(0, group.find('@')); }

}  // namespace

void MetricScores::validate() const {
    for (const auto& [name, value] : metric_values(*this)) {
        const bool wanted = phase == StudyPhase::Authenticity ? name == "correctness" : name != "correctness";
        if (wanted && !value)
            throw Error(ErrorCode::WrongPhaseMetrics,
                        "metric '" + name + "' is required in the " + std::string(to_string(phase)) + " phase");
        if (!wanted && value)
            throw Error(ErrorCode::WrongPhaseMetrics,
                        "metric '" + name + "' is not scored in the " + std::string(to_string(phase)) + " phase");
        if (!value) continue;
        if (!std::isfinite(*value) || *value < 0.0 || *value > 1.0)
            throw Error(ErrorCode::OutOfRangeScore, "metric '" + name + "' must lie in [0, 1]");
        if (name == "detail" && !on_detail_scale(*value))
            throw Error(ErrorCode::OutOfRangeScore, "detail must be one of 0, 0.5, 1");
    }
}

MetricScores MetricScores::from_json(const json& j, StudyPhase phase) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "scores must be a JSON object");
    MetricScores s;
    s.phase = phase;
    for (const auto& [key, value] : j.items()) {
        auto* slot = metric_slot(s, key);
        if (!slot) throw Error(ErrorCode::WrongPhaseMetrics, "unknown metric '" + key + "'");
        if (value.is_null()) continue;
        if (!value.is_number()) throw Error(ErrorCode::OutOfRangeScore, "metric '" + key + "' must be a number");
        *slot = value.get<double>();
    }
    return s;
}

json to_json(const MetricScores& s) {
    json j = json::object();
    for (const auto& [name, value] : metric_values(s))
        if (value) j[name] = *value;
    return j;
}

StudyGuidelines StudyGuidelines::defaults() {
    StudyGuidelines g;
    g.text = {
        {"correctness", "Decide whether this piece reads as genuine reporting (0) or as fabricated news (1). "
                        "Values in between express uncertainty."},
        {"neutral", "1 if the piece keeps a plain, report-like tone; 0 if it leans on emotive or loaded wording."},
        {"informative", "1 if its claims are backed by specifics such as figures, names, dates or places; "
                        "0 if it stays with general statements."},
        {"consistent", "1 if the whole piece develops one main idea; 0 if it drifts between unrelated ideas."},
        {"intention", "Compared with the original: 1 if the changes serve an evident misleading purpose; "
                      "0 if they look like arbitrary substitutions."},
        {"detail", "Compared with the original: 1 if the overall theme changed, 0.5 if part of the theme "
                   "changed, 0 if only details such as numbers or terms changed."},
    };
    return g;
}

StudyGuidelines StudyGuidelines::load(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + json_path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigInvalid, json_path.string() + ": " + e.what());
    }
    auto g = defaults();
    for (const auto& [k, v] : j.items()) {
        if (!v.is_string()) throw Error(ErrorCode::ConfigInvalid, "guideline '" + k + "' must be a string");
        g.text[k] = v.get<std::string>();
    }
    return g;
}

json to_json(const Annotation& a) {
    return {{"session_id", a.session_id},
            {"annotator_id", a.annotator_id},
            {"task_ref", a.task_ref},
            {"article_id", a.article_id},
            {"group", a.group},
            {"phase", to_string(a.scores.phase)},
            {"scores", to_json(a.scores)},
            {"submitted_at", a.submitted_at}};
}

Annotation annotation_from_json(const json& j) {
    Annotation a;
    a.session_id = j.at("session_id").get<std::string>();
    a.annotator_id = j.at("annotator_id").get<std::string>();
    a.task_ref = j.at("task_ref").get<std::string>();
    a.article_id = j.at("article_id").get<std::string>();
    a.group = j.at("group").get<std::string>();
    a.scores = MetricScores::from_json(j.at("scores"), parse_phase(j.at("phase").get<std::string>()));
    a.submitted_at = j.value("submitted_at", "");
    return a;
}

json to_json(const std::vector<AggregateRow>& rows) {
    json out = json::array();
    for (const auto& r : rows) {
        json row = {{"group", r.group}, {"annotations", r.annotations}, {"means", r.means}, {"counts", r.counts}};
        row["percent_agreement"] = r.percent_agreement ? json(*r.percent_agreement) : json(nullptr);
        out.push_back(std::move(row));
    }
    return out;
}

std::vector<AggregateRow> aggregate(const std::vector<Annotation>& annotations, GroupBy group_by) {
    struct Acc {
        std::size_t annotations = 0;
        std::map<std::string, double> sums;
        std::map<std::string, std::size_t> counts;
        std::map<std::pair<std::string, std::string>, std::vector<double>> items;
    };
    std::map<std::string, Acc> groups;
    for (const auto& a : annotations) {
        const auto key = group_by == GroupBy::Strategy ? strategy_part(a.group) : a.group;
        auto& acc = groups[key];
        ++acc.annotations;
        for (const auto& [name, value] : metric_values(a.scores)) {
            if (!value) continue;
            acc.sums[name] += *value;
            ++acc.counts[name];
            acc.items[{a.article_id, name}].push_back(*value);
        }
    }

    std::vector<AggregateRow> rows;
    for (const auto& [key, acc] : groups) {
        AggregateRow row;
        row.group = key;
        row.annotations = acc.annotations;
        row.counts = acc.counts;
        for (const auto& [name, sum] : acc.sums) row.means[name] = sum / static_cast<double>(acc.counts.at(name));
        std::size_t multi = 0, agreeing = 0;
        for (const auto& [_, values] : acc.items) {
            if (values.size() < 2) continue;
            ++multi;
            const bool first = values.front() >= 0.5;
            if (std::all_of(values.begin(), values.end(), [&](double v) { return (v >= 0.5) == first; })) ++agreeing;
        }
        if (multi > 0) row.percent_agreement = static_cast<double>(agreeing) / static_cast<double>(multi);
        rows.push_back(std::move(row));
    }
    return rows;
}

StudyService::StudyService(const CorpusStore& store, std::filesystem::path data_dir, StudyGuidelines guidelines)
    : store_(store), data_dir_(std::move(data_dir)), guidelines_(std::move(guidelines)) {
    if (!data_dir_.empty()) {
        std::filesystem::create_directories(data_dir_);
        replay();
    }
}

Session StudyService::build_session(const SessionRequest& request, const std::string& session_id) const {
    if (request.fake < 0 || request.real < 0 || request.fake + request.real == 0)
        throw Error(ErrorCode::InvalidArgument, "a session needs a positive number of articles");

    const auto generated = store_.select(ArticleFilter{std::set<Category>{Category::Generated}, {}, {}});

    // Resolve each requested group to the ids it covers.
    std::vector<std::string> group_names = request.groups;
    if (group_names.empty()) {
        std::set<std::string> seen;
        for (const auto& a : generated) seen.insert(a.group());
        group_names.assign(seen.begin(), seen.end());
    }
    std::vector<std::vector<std::string>> group_ids;
    for (const auto& name : group_names) {
        const auto at = name.find('@');
        const auto strategy = parse_strategy(name.substr(0, at));
        if (!strategy) throw Error(ErrorCode::UnknownStrategy, "unknown strategy in group '" + name + "'");
        std::vector<std::string> ids;
        for (const auto& a : generated) {
            if (a.strategy != strategy) continue;
            if (at != std::string::npos && a.model_name.value_or("") != name.substr(at + 1)) continue;
            ids.push_back(a.id);
        }
        std::sort(ids.begin(), ids.end());
        group_ids.push_back(std::move(ids));
    }
    if (request.fake > 0 && group_ids.empty())
        throw Error(ErrorCode::InsufficientArticles, "the corpus holds no generated articles");

    Session s;
    s.session_id = session_id;
    s.annotator_id = request.annotator_id;
    s.seed = request.seed;

    // Equal quota per group; any remainder goes to the first groups.
    std::vector<std::string> fakes;
    const auto g = group_ids.size();
    for (std::size_t i = 0; i < g; ++i) {
        const auto quota = static_cast<std::size_t>(request.fake) / g + (i < static_cast<std::size_t>(request.fake) % g);
        const auto& ids = group_ids[i];
        if (ids.size() < quota)
            throw Error(ErrorCode::InsufficientArticles, "group '" + group_names[i] + "' has " +
                                                             std::to_string(ids.size()) + " articles, needs " +
                                                             std::to_string(quota));
        const auto perm = seeded_permutation(ids.size(), request.seed + 0x9E3779B97F4A7C15ULL * (i + 1));
        for (std::size_t k = 0; k < quota; ++k) fakes.push_back(ids[perm[k]]);
    }

    std::vector<std::string> reals;
    if (request.real > 0) {
        auto pool = store_.select(ArticleFilter{std::set<Category>{Category::Real}, {}, {}});
        if (pool.size() < static_cast<std::size_t>(request.real))
            throw Error(ErrorCode::InsufficientArticles, "the corpus holds " + std::to_string(pool.size()) +
                                                             " real articles, needs " + std::to_string(request.real));
        std::vector<std::string> ids;
        for (const auto& a : pool) ids.push_back(a.id);
        std::sort(ids.begin(), ids.end());
        const auto perm = seeded_permutation(ids.size(), request.seed);
        for (int k = 0; k < request.real; ++k) reals.push_back(ids[perm[static_cast<std::size_t>(k)]]);
    }

    std::vector<std::string> all = fakes;
    all.insert(all.end(), reals.begin(), reals.end());
    const auto order = seeded_permutation(all.size(), request.seed ^ 0xA5A5A5A5A5A5A5A5ULL);
    for (std::size_t k = 0; k < order.size(); ++k)
        s.phase1_tasks.push_back({"p1-" + std::to_string(k), StudyPhase::Authenticity, all[order[k]], std::nullopt});

    for (const auto& t : s.phase1_tasks) {
        const auto& a = store_.get(t.article_id);
        if (a.category != Category::Generated) continue;
        s.phase2_tasks.push_back({"p2-" + std::to_string(s.phase2_tasks.size()), StudyPhase::Comparison, a.id,
                                  a.source_id});
    }
    return s;
}

Session StudyService::create_session(const SessionRequest& request) {
    std::lock_guard lock(mutex_);
    const auto id = "s-" + sha256_hex(request.annotator_id + "|" + std::to_string(request.seed) + "|" +
                                      std::to_string(sessions_.size()))
                               .substr(0, 12);
    auto s = build_session(request, id);
    json record = {{"session_id", id},     {"annotator_id", request.annotator_id}, {"groups", request.groups},
                   {"fake", request.fake}, {"real", request.real},                 {"seed", request.seed},
                   {"created_at", utc_timestamp()}};
    append_log("sessions.jsonl", record);
    session_requests_.push_back(record);
    sessions_[id] = s;
    return s;
}

const Session& StudyService::lookup(const std::string& session_id) const {
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session '" + session_id + "'");
    return it->second;
}

Session StudyService::session(const std::string& session_id) const {
    std::lock_guard lock(mutex_);
    return lookup(session_id);
}

json StudyService::payload_for(const Session& s, const StudyTask& task) const {
    const bool first = task.phase == StudyPhase::Authenticity;
    const auto& tasks = first ? s.phase1_tasks : s.phase2_tasks;
    const auto index = first ? s.phase1_cursor : s.phase2_cursor;
    json p = {{"session_id", s.session_id},
              {"phase", to_string(task.phase)},
              {"task_ref", task.ref},
              {"index", index},
              {"total", tasks.size()},
              {"article", {{"text", store_.get(task.article_id).text}}}};
    json guidelines = json::object();
    if (first) {
        p["metrics"] = {"correctness"};
        guidelines["correctness"] = guidelines_.text.at("correctness");
    } else {
        p["metrics"] = comparison_metrics();
        p["detail_scale"] = std::vector<double>(std::begin(kDetailScale), std::end(kDetailScale));
        p["source"] = {{"text", store_.get(*task.source_id).text}};
        for (const auto& m : comparison_metrics()) guidelines[m] = guidelines_.text.at(m);
    }
    p["guidelines"] = guidelines;
    return p;
}

json StudyService::next_task(const std::string& session_id, std::optional<StudyPhase> phase) {
    std::lock_guard lock(mutex_);
    const auto& s = lookup(session_id);
    if (s.complete()) throw Error(ErrorCode::SessionComplete, "session '" + session_id + "' is complete");
    if (phase == StudyPhase::Comparison && !s.phase1_done())
        throw Error(ErrorCode::PhaseLocked, "the comparison phase opens after all authenticity tasks");
    if (phase == StudyPhase::Authenticity && s.phase1_done())
        throw Error(ErrorCode::PhaseLocked, "the authenticity phase is finished");
    if (!s.phase1_done()) return payload_for(s, s.phase1_tasks[s.phase1_cursor]);
    return payload_for(s, s.phase2_tasks[s.phase2_cursor]);
}

json StudyService::submit_scores(const std::string& session_id, const std::string& task_ref,
                                 const MetricScores& scores) {
    std::lock_guard lock(mutex_);
    auto& s = const_cast<Session&>(lookup(session_id));
    const auto key = session_id + "/" + task_ref;
    if (annotated_.count(key)) throw Error(ErrorCode::DuplicateSubmission, "task '" + task_ref + "' already scored");
    if (s.complete()) throw Error(ErrorCode::SessionComplete, "session '" + session_id + "' is complete");
    const bool phase2_ref = task_ref.rfind("p2-", 0) == 0;
    if (phase2_ref && !s.phase1_done())
        throw Error(ErrorCode::PhaseLocked, "the comparison phase opens after all authenticity tasks");

    const auto& current = s.phase1_done() ? s.phase2_tasks[s.phase2_cursor] : s.phase1_tasks[s.phase1_cursor];
    if (task_ref != current.ref)
        throw Error(ErrorCode::WrongTask, "expected task '" + current.ref + "', got '" + task_ref + "'");
    if (scores.phase != current.phase)
        throw Error(ErrorCode::WrongPhaseMetrics, "scores are for the " + std::string(to_string(scores.phase)) +
                                                      " phase but the task is in the " +
                                                      std::string(to_string(current.phase)) + " phase");
    scores.validate();

    Annotation a{session_id, s.annotator_id, task_ref, current.article_id, store_.get(current.article_id).group(),
                 scores, utc_timestamp()};
    append_log("annotations.jsonl", to_json(a));
    annotations_.push_back(a);
    annotated_.insert(key);
    if (current.phase == StudyPhase::Authenticity)
        ++s.phase1_cursor;
    else
        ++s.phase2_cursor;

    json ack = {{"accepted", true}, {"task_ref", task_ref}, {"complete", s.complete()}};
    ack["next_phase"] = s.complete() ? json(nullptr) : json(to_string(s.phase1_done() ? StudyPhase::Comparison
                                                                                      : StudyPhase::Authenticity));
    return ack;
}

json StudyService::progress(const std::string& session_id) const {
    std::lock_guard lock(mutex_);
    const auto& s = lookup(session_id);
    json p = {{"session_id", s.session_id},
              {"annotator_id", s.annotator_id},
              {"authenticity", {{"done", s.phase1_cursor}, {"total", s.phase1_tasks.size()}}},
              {"comparison", {{"done", s.phase2_cursor}, {"total", s.phase2_tasks.size()}}},
              {"complete", s.complete()}};
    p["phase"] = s.complete() ? json(nullptr)
                              : json(to_string(s.phase1_done() ? StudyPhase::Comparison : StudyPhase::Authenticity));
    return p;
}

std::vector<Annotation> StudyService::annotations(const AnnotationFilter& filter) const {
    std::lock_guard lock(mutex_);
    std::vector<Annotation> out;
    for (const auto& a : annotations_) {
        if (filter.session_id && a.session_id != *filter.session_id) continue;
        if (filter.annotator_id && a.annotator_id != *filter.annotator_id) continue;
        out.push_back(a);
    }
    return out;
}

std::vector<AggregateRow> StudyService::aggregate(const AnnotationFilter& filter, GroupBy group_by,
                                                  const std::vector<std::string>& required_groups) const {
    const auto selected = annotations(filter);
    if (selected.empty()) throw Error(ErrorCode::EmptyGroup, "no annotations match the filter");
    auto rows = newsforge::aggregate(selected, group_by);
    for (const auto& g : required_groups) {
        if (std::none_of(rows.begin(), rows.end(), [&](const AggregateRow& r) { return r.group == g; }))
            throw Error(ErrorCode::EmptyGroup, "group '" + g + "' has no annotations");
    }
    return rows;
}

void StudyService::append_log(const std::string& file, const json& record) const {
    if (data_dir_.empty()) return;
    std::ofstream out(data_dir_ / file, std::ios::app);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot append to " + (data_dir_ / file).string());
    out << record.dump() << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::IoFailure, "write failed on " + (data_dir_ / file).string());
}

void StudyService::replay() {
    auto read_jsonl = [&](const std::string& file) {
        std::vector<json> records;
        std::ifstream in(data_dir_ / file);
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (trim(line).empty()) continue;
            try {
                records.push_back(json::parse(line));
            } catch (const json::exception& e) {
                throw Error(ErrorCode::MalformedLine, file + ":" + std::to_string(n) + ": " + e.what());
            }
        }
        return records;
    };
    for (const auto& r : read_jsonl("sessions.jsonl")) {
        SessionRequest req;
        req.annotator_id = r.at("annotator_id").get<std::string>();
        req.groups = r.value("groups", std::vector<std::string>{});
        req.fake = r.at("fake").get<int>();
        req.real = r.at("real").get<int>();
        req.seed = r.at("seed").get<std::uint64_t>();
        const auto id = r.at("session_id").get<std::string>();
        sessions_[id] = build_session(req, id);
        session_requests_.push_back(r);
    }
    for (const auto& r : read_jsonl("annotations.jsonl")) {
        auto a = annotation_from_json(r);
        auto it = sessions_.find(a.session_id);
        if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "annotation for unknown session");
        auto& s = it->second;
        if (a.scores.phase == StudyPhase::Authenticity)
            ++s.phase1_cursor;
        else
            ++s.phase2_cursor;
        annotated_.insert(a.session_id + "/" + a.task_ref);
        annotations_.push_back(std::move(a));
    }
}

}  // namespace newsforge
