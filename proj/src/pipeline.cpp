#include "newsforge/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "newsforge/error.hpp"
#include "newsforge/text.hpp"

namespace newsforge {

using json = nlohmann::json;

double average_requests(double success_rate) {
    if (!(success_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "success rate must be positive");
    return kRequestsPerAttempt / success_rate;
}

CostStats compute_cost_stats(std::int64_t qualified_count, std::int64_t sources_used) {
    if (sources_used <= 0) throw Error(ErrorCode::ZeroSources, "no sources used");
    if (qualified_count < 0 || qualified_count > sources_used)
        throw Error(ErrorCode::InvalidArgument, "qualified count must lie in [0, sources_used]");
    CostStats c;
    c.qualified_count = qualified_count;
    c.sources_used = sources_used;
    c.exact_success_rate = static_cast<double>(qualified_count) / static_cast<double>(sources_used);
    c.success_rate = std::round(c.exact_success_rate * 1000.0) / 1000.0;
    // Rates below 0.0005 would round to zero; keep the exact ratio then.
    if (c.success_rate == 0.0) c.success_rate = c.exact_success_rate;
    if (qualified_count > 0) c.avg_requests = average_requests(c.success_rate);
    return c;
}

std::string normalize_answer(std::string_view answer) {
    auto s = collapse_whitespace(ascii_lower(answer));
    while (!s.empty() && std::string_view(".!?,;:").find(s.back()) != std::string_view::npos) {
        s.pop_back();
        s = trim(s);
    }
    return s;
}

bool check_answer_divergence(std::string_view answer1, std::string_view answer2) {
    if (trim(answer1).empty() || trim(answer2).empty())
        throw Error(ErrorCode::InvalidArgument, "answers must be nonempty");
    return normalize_answer(answer1) != normalize_answer(answer2);
}

bool accept_attempt(StrategyId strategy, const GenerationOutcome& outcome, const QualificationVerdict& verdict) {
    if (!is_qa_family(strategy)) return verdict.qualified;
    if (!outcome.answer1 || !outcome.answer2 || trim(*outcome.answer1).empty() || trim(*outcome.answer2).empty())
        throw Error(ErrorCode::MissingAnswer, "QA-family outcome needs both answers");
    return verdict.qualified && check_answer_divergence(*outcome.answer1, *outcome.answer2);
}

std::string_view to_string(AttemptStatus s) {
    switch (s) {
        case AttemptStatus::Accepted: return "accepted";
        case AttemptStatus::Rejected: return "rejected";
        case AttemptStatus::RenderFailed: return "render_failed";
        case AttemptStatus::ParseFailed: return "parse_failed";
        case AttemptStatus::BackendFailed: return "backend_failed";
    }
    return "rejected";
}

namespace {

GenerationAttempt attempt_one(const Article& source, const RunConfig& config, Gateway& gateway,
                              const PromptTemplate& generation, const PromptTemplate& qualification) {
    GenerationAttempt rec;
    rec.source_id = source.id;
    rec.strategy = config.strategy;
    rec.model_name = config.model_name;

    RenderOptions opts;
    opts.model_name = config.model_name;
    opts.max_output_tokens = config.max_output_tokens;
    opts.variables = config.variables;

    ChatRequest gen_req;
    try {
        gen_req = render_generation_prompt(config.strategy, generation, source, opts);
    } catch (const Error& e) {
        rec.status = AttemptStatus::RenderFailed;
        rec.error = e.what();
        return rec;
    }

    ChatResponse gen;
    ++rec.requests_used;
    try {
        gen = gateway.complete(gen_req);
    } catch (const Error& e) {
        rec.status = AttemptStatus::BackendFailed;
        rec.error = e.what();
        return rec;
    }
    if (gen.finish_reason != FinishReason::Complete) {
        rec.status = AttemptStatus::ParseFailed;
        rec.error = "generation finished with '" + std::string(to_string(gen.finish_reason)) + "'";
        return rec;
    }
    try {
        rec.outcome = parse_generation_output(config.strategy, generation, gen.text);
    } catch (const Error& e) {
        rec.status = AttemptStatus::ParseFailed;
        rec.error = e.what();
        return rec;
    }

    ChatResponse judged;
    try {
        const auto q_req = render_qualification_prompt(source, rec.outcome->article_text, qualification, opts);
        ++rec.requests_used;
        judged = gateway.complete(q_req);
    } catch (const Error& e) {
        rec.status = e.code() == ErrorCode::MissingPlaceholder ? AttemptStatus::RenderFailed
                                                                : AttemptStatus::BackendFailed;
        rec.error = e.what();
        return rec;
    }
    try {
        rec.verdict = parse_qualification_output(judged.text);
    } catch (const Error&) {
        // Ambiguous verdicts count as unqualified.
        rec.verdict = QualificationVerdict{false, "", judged.text};
        rec.verdict_ambiguous = true;
    }

    bool accepted = accept_attempt(config.strategy, *rec.outcome, *rec.verdict);
    if (accepted && config.llm_adjudication && is_qa_family(config.strategy)) {
        Article answer_ref = source;
        answer_ref.text = *rec.outcome->answer1;
        try {
            const auto adj_req = render_qualification_prompt(answer_ref, *rec.outcome->answer2, qualification, opts);
            ++rec.adjudication_requests;
            accepted = parse_qualification_lenient(gateway.complete(adj_req).text).qualified;
        } catch (const Error& e) {
            rec.status = AttemptStatus::BackendFailed;
            rec.error = e.what();
            return rec;
        }
    }
    rec.accepted = accepted;
    rec.status = accepted ? AttemptStatus::Accepted : AttemptStatus::Rejected;
    return rec;
}

}  // namespace

GenerationReport run_generation(const RunConfig& config, Gateway& gateway, const TemplateSet& templates,
                                CorpusStore& store) {
    if (config.pool.empty()) throw Error(ErrorCode::InvalidArgument, "source pool is empty");
    if (config.target_count == 0) throw Error(ErrorCode::InvalidArgument, "target_count must be positive");
    if (config.parallelism < 1) throw Error(ErrorCode::InvalidArgument, "parallelism must be >= 1");
    const auto& generation = templates.generation(config.strategy);
    const auto& qualification = templates.qualification();

    std::vector<const Article*> sources;
    sources.reserve(config.pool.size());
    for (const auto& id : config.pool) {
        const auto& a = store.get(id);
        if (a.category != Category::Real)
            throw Error(ErrorCode::InvalidArgument, "pool article " + id + " is not a real article");
        sources.push_back(&a);
    }
    {
        auto sorted = config.pool;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw Error(ErrorCode::InvalidArgument, "source pool contains duplicate ids");
    }

    GenerationReport report;
    report.config = config;
    const auto order = seeded_permutation(sources.size(), config.seed);
    const auto width = static_cast<std::size_t>(config.parallelism);

    std::size_t pos = 0;
    while (report.accepted_count < config.target_count && pos < order.size() && !report.aborted) {
        // A wave never holds more attempts than acceptances still needed, so
        // it cannot overshoot the target and every drawn source is consumed.
        const std::size_t k = std::min({width, config.target_count - report.accepted_count, order.size() - pos});
        std::vector<GenerationAttempt> wave(k);

#pragma omp parallel for num_threads(static_cast<int>(k)) schedule(static, 1) if (k > 1)
        for (std::size_t i = 0; i < k; ++i) {
            try {
                wave[i] = attempt_one(*sources[order[pos + i]], config, gateway, generation, qualification);
            } catch (const std::exception& e) {
                wave[i].source_id = sources[order[pos + i]]->id;
                wave[i].strategy = config.strategy;
                wave[i].model_name = config.model_name;
                wave[i].status = AttemptStatus::BackendFailed;
                wave[i].error = e.what();
            }
        }

        for (auto& rec : wave) {
            report.total_requests += rec.requests_used;
            if (rec.accepted) {
                Article generated;
                generated.text = rec.outcome->article_text;
                generated.category = Category::Generated;
                generated.strategy = config.strategy;
                generated.model_name = config.model_name;
                generated.source_id = rec.source_id;
                generated.origin = "generated";
                generated.qualification_explanation = rec.verdict->explanation;
                generated.id = content_id(generated);
                store.add(generated);
                rec.generated_id = generated.id;
                ++report.accepted_count;
            }
            if (rec.status == AttemptStatus::BackendFailed && config.stop_on_backend_failure && !report.aborted)
                report.aborted = rec.error;
            report.attempts.push_back(std::move(rec));
        }
        pos += k;
    }

    report.target_reached = report.accepted_count >= config.target_count;
    report.pool_exhausted = !report.target_reached && pos >= order.size();
    report.cost = compute_cost_stats(static_cast<std::int64_t>(report.accepted_count),
                                     static_cast<std::int64_t>(report.attempts.size()));
    return report;
}

// ---------------------------------------------------------------------------
// JSON

json to_json(const CostStats& c) {
    json j = {{"qualified_count", c.qualified_count},
              {"sources_used", c.sources_used},
              {"exact_success_rate", c.exact_success_rate},
              {"success_rate", c.success_rate}};
    j["avg_requests"] = c.avg_requests ? json(*c.avg_requests) : json(nullptr);
    return j;
}

json to_json(const GenerationAttempt& a) {
    json j = {{"source_id", a.source_id},
              {"strategy", to_string(a.strategy)},
              {"model_name", a.model_name},
              {"status", to_string(a.status)},
              {"accepted", a.accepted},
              {"requests_used", a.requests_used}};
    if (a.adjudication_requests) j["adjudication_requests"] = a.adjudication_requests;
    if (a.outcome) {
        json o = {{"article_text", a.outcome->article_text}, {"step_outputs", a.outcome->step_outputs}};
        if (a.outcome->answer1) o["answer1"] = *a.outcome->answer1;
        if (a.outcome->answer2) o["answer2"] = *a.outcome->answer2;
        j["outcome"] = std::move(o);
    }
    if (a.verdict) {
        j["verdict"] = {{"qualified", a.verdict->qualified},
                        {"explanation", a.verdict->explanation},
                        {"raw", a.verdict->raw},
                        {"ambiguous", a.verdict_ambiguous}};
    }
    if (a.generated_id) j["generated_id"] = *a.generated_id;
    if (!a.error.empty()) j["error"] = a.error;
    return j;
}

json to_json(const GenerationReport& r) {
    json attempts = json::array();
    for (const auto& a : r.attempts) attempts.push_back(to_json(a));
    json config = {{"strategy", to_string(r.config.strategy)},
                   {"model_name", r.config.model_name},
                   {"target_count", r.config.target_count},
                   {"seed", r.config.seed},
                   {"parallelism", r.config.parallelism},
                   {"llm_adjudication", r.config.llm_adjudication},
                   {"pool", r.config.pool}};
    json j = {{"config", std::move(config)},
              {"attempts", std::move(attempts)},
              {"cost", to_json(r.cost)},
              {"accepted_count", r.accepted_count},
              {"total_requests", r.total_requests},
              {"target_reached", r.target_reached},
              {"pool_exhausted", r.pool_exhausted}};
    j["aborted"] = r.aborted ? json(*r.aborted) : json(nullptr);
    return j;
}

}  // namespace newsforge
