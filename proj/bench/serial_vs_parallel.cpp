// Serial reference vs OpenMP kernels on synthetic inputs.

#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "newsforge/detection.hpp"
#include "newsforge/pattern.hpp"

using namespace newsforge;

namespace {

std::vector<Explanation> explanations(std::size_t n) {
    static const std::vector<std::string> words = {
        "the",    "candidate", "changes", "cause",   "of",      "delays",  "and",      "repair",
        "time",   "not",       "mention", "article", "numbers", "differ",  "officials", "claim",
        "theme",  "shifted",   "running", "reports", "generated", "source", "first",    "second"};
    std::mt19937 rng(1);
    std::vector<Explanation> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::string text;
        for (int w = 0; w < 40; ++w) text += words[rng() % words.size()] + (w % 9 == 8 ? ". " : " ");
        out.emplace_back("g" + std::to_string(i % 8), std::move(text));
    }
    return out;
}

struct Scored {
    std::vector<Prediction> predictions;
    LabelMap labels;
};

Scored scored(std::size_t n) {
    std::mt19937 rng(2);
    Scored s;
    s.predictions.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto id = "a" + std::to_string(i);
        s.labels[id] = rng() % 2 ? NewsLabel::Fake : NewsLabel::Real;
        const auto r = rng() % 10;
        s.predictions.push_back(
            {std::move(id), r == 0 ? PredictedLabel::Unparseable : r % 2 ? PredictedLabel::Fake : PredictedLabel::Real,
             std::nullopt, "bench"});
    }
    return s;
}

void BM_FrequencySerial(benchmark::State& state) {
    const auto docs = explanations(static_cast<std::size_t>(state.range(0)));
    const TokenPipelineConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(frequency_table_serial(docs, cfg));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_FrequencyParallel(benchmark::State& state) {
    const auto docs = explanations(static_cast<std::size_t>(state.range(0)));
    const TokenPipelineConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(frequency_table(docs, cfg));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_EvaluateSerial(benchmark::State& state) {
    const auto s = scored(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(evaluate_serial(s.predictions, s.labels));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_EvaluateParallel(benchmark::State& state) {
    const auto s = scored(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(evaluate(s.predictions, s.labels));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_FrequencySerial)->Arg(1000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FrequencyParallel)->Arg(1000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateSerial)->Arg(10000)->Arg(1000000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateParallel)->Arg(10000)->Arg(1000000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
