#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "newsforge/corpus.hpp"
#include "newsforge/gateway.hpp"
#include "newsforge/strategy.hpp"

namespace newsforge {

struct Prediction {
    std::string article_id;
    PredictedLabel predicted = PredictedLabel::Unparseable;
    std::optional<std::string> raw_output;
    std::string detector_name;
};

/// Confusion counts with "fake" as the positive class.
struct Confusion {
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::int64_t total() const { return tp + fp + fn + tn; }
    Confusion& operator+=(const Confusion& o) {
        tp += o.tp, fp += o.fp, fn += o.fn, tn += o.tn;
        return *this;
    }
    bool operator==(const Confusion&) const = default;
};

/// Metrics are empty when their denominator is zero.
struct BenchMetrics {
    std::optional<double> acc, f1, prc, rcl;
    Confusion confusion;
    std::int64_t unparseable_count = 0;
};

BenchMetrics metrics_from_confusion(const Confusion& c, std::int64_t unparseable = 0);

using LabelMap = std::unordered_map<std::string, NewsLabel>;

/// Scores predictions; Unparseable ones are excluded from the confusion
/// matrix and counted separately. Parallel over predictions.
BenchMetrics evaluate(const std::vector<Prediction>& predictions, const LabelMap& labels);
/// Single-threaded reference for `evaluate`.
BenchMetrics evaluate_serial(const std::vector<Prediction>& predictions, const LabelMap& labels);

/// One-shot prompt classification at temperature 0. Unparseable answers are
/// recorded as-is, never retried.
Prediction classify(const Article& incoming, const Article& example, NewsLabel example_label, Gateway& gateway,
                    const PromptTemplate& detection_template, const RenderOptions& options = {});

/// Reads predictions from CSV (header with article_id,predicted; optional
/// leading "# detector: name" line) or JSONL (optional leading
/// {"detector_name": ...} line). With a store, every id must resolve.
std::vector<Prediction> ingest_external_predictions(const std::filesystem::path& path,
                                                    const CorpusStore* store = nullptr);

enum class BenchSplit { WithHumanFakes, WithoutHumanFakes };

std::string_view to_string(BenchSplit split);
std::optional<BenchSplit> parse_split(std::string_view text);

ArticleFilter split_filter(BenchSplit split);

struct PromptDetector {
    Gateway* gateway = nullptr;
    const PromptTemplate* detection_template = nullptr;
    std::string exemplar_id;
    NewsLabel exemplar_label = NewsLabel::Real;
    std::string model_name = "default";
    int parallelism = 1;
};

/// Either ingested predictions or a prompt detector run over the split.
struct DetectorSpec {
    std::string name;
    std::optional<std::vector<Prediction>> predictions;
    std::optional<PromptDetector> prompt;
};

struct BenchReport {
    std::string detector_name;
    BenchSplit split = BenchSplit::WithHumanFakes;
    BenchMetrics overall;
    /// Per generation group: that group's fakes scored together with every
    /// real article of the split.
    std::map<std::string, BenchMetrics> per_group;
    std::vector<Prediction> predictions;
    std::int64_t missing_predictions = 0;
};

BenchReport run_benchmark(const CorpusStore& store, BenchSplit split, const DetectorSpec& detector);

nlohmann::json to_json(const BenchMetrics& m);
nlohmann::json to_json(const BenchReport& r);
/// Aligned text table with ACC / F1 / PRC / RCL columns.
std::string format_table(const BenchReport& r);

}  // namespace newsforge
