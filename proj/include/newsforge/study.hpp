#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "newsforge/corpus.hpp"

namespace newsforge {

/// Blind authenticity judgments first, then paired comparisons.
enum class StudyPhase { Authenticity, Comparison };

std::string_view to_string(StudyPhase p);

inline constexpr double kDetailScale[] = {0.0, 0.5, 1.0};

/// The six study metrics. Authenticity submissions carry only correctness
/// (1 = judged fake); comparison submissions carry the other five.
struct MetricScores {
    StudyPhase phase = StudyPhase::Authenticity;
    std::optional<double> correctness;
    std::optional<double> neutral;
    std::optional<double> informative;
    std::optional<double> consistent;
    std::optional<double> intention;
    std::optional<double> detail;

    /// Throws WrongPhaseMetrics or OutOfRangeScore.
    void validate() const;

    static MetricScores from_json(const nlohmann::json& j, StudyPhase phase);
};

nlohmann::json to_json(const MetricScores& s);

inline const std::vector<std::string>& comparison_metrics() {
    static const std::vector<std::string> names = {"neutral", "informative", "consistent", "intention", "detail"};
    return names;
}

/// Scoring guideline text per metric, shown to evaluators with each task.
struct StudyGuidelines {
    std::map<std::string, std::string> text;

    static StudyGuidelines defaults();
    static StudyGuidelines load(const std::filesystem::path& json_path);
};

struct StudyTask {
    std::string ref;  // "p1-<n>" or "p2-<n>"
    StudyPhase phase = StudyPhase::Authenticity;
    std::string article_id;
    std::optional<std::string> source_id;  // comparison tasks
};

struct Session {
    std::string session_id;
    std::string annotator_id;
    std::uint64_t seed = 0;
    std::vector<StudyTask> phase1_tasks;
    std::vector<StudyTask> phase2_tasks;
    std::size_t phase1_cursor = 0;
    std::size_t phase2_cursor = 0;

    bool phase1_done() const { return phase1_cursor >= phase1_tasks.size(); }
    bool complete() const { return phase1_done() && phase2_cursor >= phase2_tasks.size(); }
};

struct SessionRequest {
    std::string annotator_id;
    /// Generation groups to stratify over: "STRATEGY@model" matches one
    /// model, "STRATEGY" any model. Empty = every group in the corpus.
    std::vector<std::string> groups;
    int fake = 80;
    int real = 10;
    std::uint64_t seed = 0;
};

struct Annotation {
    std::string session_id;
    std::string annotator_id;
    std::string task_ref;
    std::string article_id;
    std::string group;  // generation group or category of the article
    MetricScores scores;
    std::string submitted_at;
};

nlohmann::json to_json(const Annotation& a);
Annotation annotation_from_json(const nlohmann::json& j);

struct AnnotationFilter {
    std::optional<std::string> session_id;
    std::optional<std::string> annotator_id;
};

enum class GroupBy { Group, Strategy };

struct AggregateRow {
    std::string group;
    std::size_t annotations = 0;
    std::map<std::string, double> means;         // metric -> mean
    std::map<std::string, std::size_t> counts;   // metric -> number of scores
    /// Share of (article, metric) items with at least two annotators whose
    /// scores agree after binarizing at 0.5. Convenience statistic only.
    std::optional<double> percent_agreement;
};

nlohmann::json to_json(const std::vector<AggregateRow>& rows);

/// Arithmetic means of a set of annotations grouped by `group_by`.
std::vector<AggregateRow> aggregate(const std::vector<Annotation>& annotations, GroupBy group_by);

/// Two-phase human study over a corpus. Sessions and annotations are
/// appended to JSONL logs under `data_dir` (if given) and replayed on start.
class StudyService {
public:
    StudyService(const CorpusStore& store, std::filesystem::path data_dir = {},
                 StudyGuidelines guidelines = StudyGuidelines::defaults());

    Session create_session(const SessionRequest& request);

    /// Current task payload. With `phase` = Comparison before phase 1 is
    /// finished, throws PhaseLocked.
    nlohmann::json next_task(const std::string& session_id, std::optional<StudyPhase> phase = std::nullopt);

    nlohmann::json submit_scores(const std::string& session_id, const std::string& task_ref,
                                 const MetricScores& scores);

    nlohmann::json progress(const std::string& session_id) const;

    /// Throws EmptyGroup when no annotation matches, or when a group in
    /// `required_groups` has none.
    std::vector<AggregateRow> aggregate(const AnnotationFilter& filter, GroupBy group_by,
                                        const std::vector<std::string>& required_groups = {}) const;

    std::vector<Annotation> annotations(const AnnotationFilter& filter = {}) const;
    Session session(const std::string& session_id) const;

private:
    Session build_session(const SessionRequest& request, const std::string& session_id) const;
    const Session& lookup(const std::string& session_id) const;
    nlohmann::json payload_for(const Session& s, const StudyTask& task) const;
    void append_log(const std::string& file, const nlohmann::json& record) const;
    void replay();

    const CorpusStore& store_;
    std::filesystem::path data_dir_;
    StudyGuidelines guidelines_;
    mutable std::mutex mutex_;
    std::map<std::string, Session> sessions_;
    std::vector<nlohmann::json> session_requests_;
    std::vector<Annotation> annotations_;
    std::set<std::string> annotated_;  // session_id + '/' + task_ref
};

}  // namespace newsforge
