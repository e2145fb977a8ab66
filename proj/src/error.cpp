#include "newsforge/error.hpp"

namespace newsforge {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::TransportExhausted: return "TransportExhausted";
        case ErrorCode::AuthMissing: return "AuthMissing";
        case ErrorCode::ScriptExhausted: return "ScriptExhausted";
        case ErrorCode::BackendRejected: return "BackendRejected";
        case ErrorCode::TemplateInvalid: return "TemplateInvalid";
        case ErrorCode::MissingPlaceholder: return "MissingPlaceholder";
        case ErrorCode::StrategyTemplateMismatch: return "StrategyTemplateMismatch";
        case ErrorCode::EmptySource: return "EmptySource";
        case ErrorCode::EmptyCandidate: return "EmptyCandidate";
        case ErrorCode::UnparseableOutput: return "UnparseableOutput";
        case ErrorCode::MissingAnswer: return "MissingAnswer";
        case ErrorCode::AmbiguousVerdict: return "AmbiguousVerdict";
        case ErrorCode::SelfExampleError: return "SelfExampleError";
        case ErrorCode::InvalidLabel: return "InvalidLabel";
        case ErrorCode::TemplateMissing: return "TemplateMissing";
        case ErrorCode::BackendFailure: return "BackendFailure";
        case ErrorCode::ZeroSources: return "ZeroSources";
        case ErrorCode::MalformedLine: return "MalformedLine";
        case ErrorCode::CategoryFieldConflict: return "CategoryFieldConflict";
        case ErrorCode::InsufficientPool: return "InsufficientPool";
        case ErrorCode::EmptySelection: return "EmptySelection";
        case ErrorCode::IoFailure: return "IoFailure";
        case ErrorCode::UnknownArticle: return "UnknownArticle";
        case ErrorCode::MissingLabel: return "MissingLabel";
        case ErrorCode::UnknownArticleId: return "UnknownArticleId";
        case ErrorCode::MalformedRow: return "MalformedRow";
        case ErrorCode::SingleClassSelection: return "SingleClassSelection";
        case ErrorCode::UnpairedArticles: return "UnpairedArticles";
        case ErrorCode::InsufficientArticles: return "InsufficientArticles";
        case ErrorCode::UnknownStrategy: return "UnknownStrategy";
        case ErrorCode::UnknownSession: return "UnknownSession";
        case ErrorCode::SessionComplete: return "SessionComplete";
        case ErrorCode::PhaseLocked: return "PhaseLocked";
        case ErrorCode::OutOfRangeScore: return "OutOfRangeScore";
        case ErrorCode::WrongPhaseMetrics: return "WrongPhaseMetrics";
        case ErrorCode::DuplicateSubmission: return "DuplicateSubmission";
        case ErrorCode::WrongTask: return "WrongTask";
        case ErrorCode::EmptyGroup: return "EmptyGroup";
        case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    }
    return "Unknown";
}

}  // namespace newsforge
