#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "newsforge/error.hpp"

namespace newsforge {

// Sampling temperatures per request role.
inline constexpr double kGenerationTemperature = 0.7;
inline constexpr double kJudgeTemperature = 0.0;  // qualification and detection

struct ChatRequest {
    std::string system_message;
    std::vector<std::string> user_messages;
    double temperature = kGenerationTemperature;
    int max_output_tokens = 2048;
    std::string model_name = "default";

    /// Throws Error(InvalidArgument) when a type invariant is violated.
    void validate() const;
};

enum class FinishReason { Complete, Truncated, Error };

std::string_view to_string(FinishReason reason);
FinishReason finish_reason_from_string(std::string_view text);

struct ChatResponse {
    std::string text;
    FinishReason finish_reason = FinishReason::Complete;
    int request_count = 1;  // 1 plus transport retries consumed
};

struct RetryPolicy {
    int max_attempts = 3;
    int backoff_base_ms = 500;
};

enum class BackendKind { Http, Mock };

/// One scripted mock reply. `transport_error` simulates a retryable transport
/// failure and consumes the entry without producing a response.
struct MockReply {
    std::string text;
    FinishReason finish_reason = FinishReason::Complete;
    bool transport_error = false;
};

/// Rule-driven mock reply: the first rule whose `contains` needle occurs in
/// the system message or any user message answers the request.
struct MockRule {
    std::string contains;
    MockReply reply;
};

struct BackendConfig {
    BackendKind kind = BackendKind::Mock;
    std::optional<std::string> endpoint_url;
    std::optional<std::string> auth_token_env_var;
    std::vector<MockReply> script;
    std::vector<MockRule> rules;
    bool cycle_script = false;
    RetryPolicy retry;
    int timeout_ms = 60000;

    void validate() const;

    /// Parses a backend block of the application config. `script_path` is
    /// resolved against `base_dir`.
    static BackendConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
};

/// Reads a JSONL mock script: one {"text": ..., "finish_reason": ...} object per line.
std::vector<MockReply> load_mock_script(const std::filesystem::path& path);

/// Retryable failure raised by a backend; the gateway turns exhaustion into
/// Error(TransportExhausted).
class TransportFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TransportExhaustedError : public Error {
public:
    TransportExhaustedError(int attempts, const std::string& last_failure)
        : Error(ErrorCode::TransportExhausted,
                "gave up after " + std::to_string(attempts) + " attempts: " + last_failure),
          attempts_(attempts) {}

    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual ChatResponse send(const ChatRequest& request) = 0;
};

class MockBackend final : public Backend {
public:
    MockBackend(std::vector<MockReply> script, std::vector<MockRule> rules = {}, bool cycle = false);

    ChatResponse send(const ChatRequest& request) override;

    /// Every request received, in arrival order.
    std::vector<ChatRequest> received() const;
    std::size_t remaining() const;

private:
    mutable std::mutex mutex_;
    std::vector<MockReply> script_;
    std::vector<MockRule> rules_;
    bool cycle_;
    std::size_t cursor_ = 0;
    std::vector<ChatRequest> received_;
};

/// OpenAI-compatible chat-completions client.
class HttpBackend final : public Backend {
public:
    HttpBackend(std::string endpoint_url, std::optional<std::string> auth_token_env_var,
                int timeout_ms);

    ChatResponse send(const ChatRequest& request) override;

    /// JSON body sent for `request`; exposed for wire-format tests.
    static std::string encode_request(const ChatRequest& request);
    static ChatResponse decode_response(std::string_view body);

private:
    std::string scheme_host_port_;
    std::string path_;
    std::optional<std::string> auth_token_env_var_;
    int timeout_ms_;
};

std::shared_ptr<Backend> make_backend(const BackendConfig& config);

/// Uniform entry point for chat completions. Counts logical requests (one per
/// `complete` call) separately from transport attempts.
class Gateway {
public:
    explicit Gateway(const BackendConfig& config);
    Gateway(std::shared_ptr<Backend> backend, RetryPolicy retry);

    ChatResponse complete(const ChatRequest& request);

    std::int64_t request_count() const noexcept { return logical_requests_.load(); }
    std::int64_t transport_attempts() const noexcept { return transport_attempts_.load(); }

private:
    std::shared_ptr<Backend> backend_;
    RetryPolicy retry_;
    std::atomic<std::int64_t> logical_requests_{0};
    std::atomic<std::int64_t> transport_attempts_{0};
};

/// Number of logical requests issued through `session`.
inline std::int64_t count_requests(const Gateway& session) { return session.request_count(); }

}  // namespace newsforge
