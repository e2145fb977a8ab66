#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "newsforge/corpus.hpp"
#include "newsforge/gateway.hpp"
#include "newsforge/strategy.hpp"

namespace newsforge {

/// Cost of a generation run. `success_rate` is the ratio rounded to three
/// decimals, the precision used when reporting; `avg_requests` = 2 / success_rate.
struct CostStats {
    std::int64_t qualified_count = 0;
    std::int64_t sources_used = 0;
    double exact_success_rate = 0.0;
    double success_rate = 0.0;
    std::optional<double> avg_requests;  // undefined when nothing qualified
};

inline constexpr int kRequestsPerAttempt = 2;  // one generation + one qualification

/// Requests per qualified article at a given success rate.
double average_requests(double success_rate);

CostStats compute_cost_stats(std::int64_t qualified_count, std::int64_t sources_used);

/// Normalized string inequality: lowercase, collapsed whitespace, terminal
/// punctuation stripped.
bool check_answer_divergence(std::string_view answer1, std::string_view answer2);
std::string normalize_answer(std::string_view answer);

/// Throws Error(MissingAnswer) for QA-family outcomes lacking answers.
bool accept_attempt(StrategyId strategy, const GenerationOutcome& outcome, const QualificationVerdict& verdict);

struct RunConfig {
    StrategyId strategy = StrategyId::VLPrompt;
    std::string model_name = "default";
    std::size_t target_count = 1;
    std::uint64_t seed = 0;
    std::vector<std::string> pool;
    /// Attempts in flight at once. Results are committed in draw order, so
    /// any width gives the same report when the backend answers each request
    /// independently of arrival order.
    int parallelism = 1;
    /// Judge answer divergence with an extra model call (qualification
    /// template on the two answers). Those calls are not in the cost stats.
    bool llm_adjudication = false;
    bool stop_on_backend_failure = true;
    int max_output_tokens = 2048;
    std::map<std::string, std::string> variables;
};

enum class AttemptStatus { Accepted, Rejected, RenderFailed, ParseFailed, BackendFailed };

std::string_view to_string(AttemptStatus s);

struct GenerationAttempt {
    std::string source_id;
    StrategyId strategy = StrategyId::VLPrompt;
    std::string model_name;
    AttemptStatus status = AttemptStatus::Rejected;
    std::optional<GenerationOutcome> outcome;
    std::optional<QualificationVerdict> verdict;
    bool verdict_ambiguous = false;
    bool accepted = false;
    int requests_used = 0;
    int adjudication_requests = 0;
    std::optional<std::string> generated_id;
    std::string error;
};

struct GenerationReport {
    RunConfig config;
    std::vector<GenerationAttempt> attempts;
    CostStats cost;
    std::size_t accepted_count = 0;
    std::int64_t total_requests = 0;
    bool target_reached = false;
    bool pool_exhausted = false;
    std::optional<std::string> aborted;  // set when a backend failure stopped the run
};

nlohmann::json to_json(const CostStats& c);
nlohmann::json to_json(const GenerationAttempt& a);
nlohmann::json to_json(const GenerationReport& r);

/// Generate-then-qualify loop over the pool in seed order until the target
/// is reached or the pool is exhausted. Each source is attempted at most once.
GenerationReport run_generation(const RunConfig& config, Gateway& gateway, const TemplateSet& templates,
                                CorpusStore& store);

}  // namespace newsforge
