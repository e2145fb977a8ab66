#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace newsforge {

enum class ErrorCode {
    InvalidArgument,
    // llm_gateway
    TransportExhausted,
    AuthMissing,
    ScriptExhausted,
    BackendRejected,
    // strategy_engine
    TemplateInvalid,
    MissingPlaceholder,
    StrategyTemplateMismatch,
    EmptySource,
    EmptyCandidate,
    UnparseableOutput,
    MissingAnswer,
    AmbiguousVerdict,
    SelfExampleError,
    InvalidLabel,
    // generation_pipeline
    TemplateMissing,
    BackendFailure,
    ZeroSources,
    // corpus_store
    MalformedLine,
    CategoryFieldConflict,
    InsufficientPool,
    EmptySelection,
    IoFailure,
    UnknownArticle,
    // detection_bench
    MissingLabel,
    UnknownArticleId,
    MalformedRow,
    SingleClassSelection,
    // pattern_lab
    UnpairedArticles,
    // study_server
    InsufficientArticles,
    UnknownStrategy,
    UnknownSession,
    SessionComplete,
    PhaseLocked,
    OutOfRangeScore,
    WrongPhaseMetrics,
    DuplicateSubmission,
    WrongTask,
    EmptyGroup,
    // cli
    ConfigInvalid,
};

std::string_view to_string(ErrorCode code);

/// Every module reports failures through this one exception type; `code()`
/// names the contract violation, `what()` carries the human-readable detail.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace newsforge
