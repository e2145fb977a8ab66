#include "newsforge/gateway.hpp"

#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace newsforge {

using json = nlohmann::json;

namespace {

std::string rstrip(std::string text) {
    auto end = text.find_last_not_of(" \t\r\n\f\v");
    text.erase(end == std::string::npos ? 0 : end + 1);
    return text;
}

MockReply reply_from_json(const json& j) {
    MockReply reply;
    reply.text = j.value("text", std::string{});
    reply.finish_reason = finish_reason_from_string(j.value("finish_reason", std::string{"complete"}));
    reply.transport_error = j.value("transport_error", false);
    return reply;
}

}  // namespace

void ChatRequest::validate() const {
    if (!(temperature >= 0.0 && temperature <= 2.0))
        throw Error(ErrorCode::InvalidArgument, "temperature must lie in [0,2]");
    if (user_messages.empty())
        throw Error(ErrorCode::InvalidArgument, "at least one user message is required");
    if (max_output_tokens <= 0)
        throw Error(ErrorCode::InvalidArgument, "max_output_tokens must be positive");
    if (model_name.empty())
        throw Error(ErrorCode::InvalidArgument, "model_name must not be empty");
}

std::string_view to_string(FinishReason reason) {
    switch (reason) {
        case FinishReason::Complete: return "complete";
        case FinishReason::Truncated: return "truncated";
        case FinishReason::Error: return "error";
    }
    return "error";
}

FinishReason finish_reason_from_string(std::string_view text) {
    // Accept both our own names and the OpenAI wire names.
    if (text == "complete" || text == "stop") return FinishReason::Complete;
    if (text == "truncated" || text == "length") return FinishReason::Truncated;
    if (text == "error") return FinishReason::Error;
    throw Error(ErrorCode::InvalidArgument, "unknown finish_reason '" + std::string(text) + "'");
}

void BackendConfig::validate() const {
    if (kind == BackendKind::Http && (!endpoint_url || endpoint_url->empty()))
        throw Error(ErrorCode::ConfigInvalid, "http backend requires endpoint_url");
    if (kind == BackendKind::Mock && script.empty() && rules.empty())
        throw Error(ErrorCode::ConfigInvalid, "mock backend requires a script or rules");
    if (retry.max_attempts < 1 || retry.backoff_base_ms < 0)
        throw Error(ErrorCode::ConfigInvalid, "retry policy out of range");
}

BackendConfig BackendConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
    BackendConfig config;
    const auto kind = j.value("kind", std::string{"mock"});
    if (kind == "http") {
        config.kind = BackendKind::Http;
    } else if (kind == "mock") {
        config.kind = BackendKind::Mock;
    } else {
        throw Error(ErrorCode::ConfigInvalid, "unknown backend kind '" + kind + "'");
    }
    if (j.contains("endpoint_url")) config.endpoint_url = j.at("endpoint_url").get<std::string>();
    if (j.contains("auth_token_env_var"))
        config.auth_token_env_var = j.at("auth_token_env_var").get<std::string>();
    if (j.contains("script_path")) {
        std::filesystem::path p = j.at("script_path").get<std::string>();
        config.script = load_mock_script(p.is_absolute() ? p : base_dir / p);
    }
    if (j.contains("script"))
        for (const auto& entry : j.at("script")) config.script.push_back(reply_from_json(entry));
    if (j.contains("rules"))
        for (const auto& rule : j.at("rules"))
            config.rules.push_back({rule.at("contains").get<std::string>(), reply_from_json(rule)});
    config.cycle_script = j.value("cycle", false);
    if (j.contains("retry")) {
        config.retry.max_attempts = j.at("retry").value("max_attempts", config.retry.max_attempts);
        config.retry.backoff_base_ms = j.at("retry").value("backoff_base_ms", config.retry.backoff_base_ms);
    }
    config.timeout_ms = j.value("timeout_ms", config.timeout_ms);
    config.validate();
    return config;
}

std::vector<MockReply> load_mock_script(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open mock script " + path.string());
    std::vector<MockReply> script;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            script.push_back(reply_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::MalformedLine,
                        path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return script;
}

// ---------------------------------------------------------------------------
// MockBackend

MockBackend::MockBackend(std::vector<MockReply> script, std::vector<MockRule> rules, bool cycle)
    : script_(std::move(script)), rules_(std::move(rules)), cycle_(cycle) {}

ChatResponse MockBackend::send(const ChatRequest& request) {
    std::lock_guard lock(mutex_);
    received_.push_back(request);

    const MockReply* reply = nullptr;
    for (const auto& rule : rules_) {
        bool hit = request.system_message.find(rule.contains) != std::string::npos;
        for (const auto& msg : request.user_messages)
            hit = hit || msg.find(rule.contains) != std::string::npos;
        if (hit) {
            reply = &rule.reply;
            break;
        }
    }
    if (reply == nullptr) {
        if (cursor_ >= script_.size()) {
            if (!cycle_ || script_.empty())
                throw Error(ErrorCode::ScriptExhausted, "mock script has no remaining responses");
            cursor_ = 0;
        }
        reply = &script_[cursor_++];
    }
    if (reply->transport_error) throw TransportFailure("scripted transport failure");
    return {reply->text, reply->finish_reason, 1};
}

std::vector<ChatRequest> MockBackend::received() const {
    std::lock_guard lock(mutex_);
    return received_;
}

std::size_t MockBackend::remaining() const {
    std::lock_guard lock(mutex_);
    return script_.size() - cursor_;
}

// ---------------------------------------------------------------------------
// HttpBackend

HttpBackend::HttpBackend(std::string endpoint_url, std::optional<std::string> auth_token_env_var,
                         int timeout_ms)
    : auth_token_env_var_(std::move(auth_token_env_var)), timeout_ms_(timeout_ms) {
    const auto scheme_end = endpoint_url.find("://");
    if (scheme_end == std::string::npos)
        throw Error(ErrorCode::ConfigInvalid, "endpoint_url needs a scheme: " + endpoint_url);
    const auto path_start = endpoint_url.find('/', scheme_end + 3);
    scheme_host_port_ = endpoint_url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : endpoint_url.substr(path_start);
}

std::string HttpBackend::encode_request(const ChatRequest& request) {
    json messages = json::array();
    if (!request.system_message.empty())
        messages.push_back({{"role", "system"}, {"content", request.system_message}});
    for (const auto& msg : request.user_messages)
        messages.push_back({{"role", "user"}, {"content", msg}});
    json body = {{"model", request.model_name},
                 {"messages", messages},
                 {"temperature", request.temperature},
                 {"max_tokens", request.max_output_tokens}};
    return body.dump();
}

ChatResponse HttpBackend::decode_response(std::string_view body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BackendRejected, std::string("malformed response body: ") + e.what());
    }
    if (!j.contains("choices") || j["choices"].empty())
        throw Error(ErrorCode::BackendRejected, "response has no choices");
    const auto& choice = j["choices"][0];
    ChatResponse response;
    if (choice.contains("message") && choice["message"].contains("content") &&
        choice["message"]["content"].is_string())
        response.text = choice["message"]["content"].get<std::string>();
    const auto reason = choice.value("finish_reason", std::string{"stop"});
    response.finish_reason = (reason == "length")  ? FinishReason::Truncated
                             : (reason == "stop")  ? FinishReason::Complete
                             : reason == "error"   ? FinishReason::Error
                                                   : FinishReason::Complete;
    return response;
}

ChatResponse HttpBackend::send(const ChatRequest& request) {
    const char* token = nullptr;
    if (auth_token_env_var_) token = std::getenv(auth_token_env_var_->c_str());
    if (token == nullptr || *token == '\0')
        throw Error(ErrorCode::AuthMissing,
                    "no auth token in environment variable '" + auth_token_env_var_.value_or("") + "'");

    httplib::Client client(scheme_host_port_);
    const auto seconds = timeout_ms_ / 1000;
    const auto micros = (timeout_ms_ % 1000) * 1000;
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);
    client.set_bearer_token_auth(token);

    auto result = client.Post(path_, encode_request(request), "application/json");
    if (!result) throw TransportFailure("transport error: " + httplib::to_string(result.error()));
    if (result->status >= 500 || result->status == 429)
        throw TransportFailure("server returned HTTP " + std::to_string(result->status));
    if (result->status != 200)
        throw Error(ErrorCode::BackendRejected,
                    "HTTP " + std::to_string(result->status) + ": " + result->body);
    return decode_response(result->body);
}

std::shared_ptr<Backend> make_backend(const BackendConfig& config) {
    config.validate();
    if (config.kind == BackendKind::Http)
        return std::make_shared<HttpBackend>(*config.endpoint_url, config.auth_token_env_var,
                                             config.timeout_ms);
    return std::make_shared<MockBackend>(config.script, config.rules, config.cycle_script);
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(const BackendConfig& config) : Gateway(make_backend(config), config.retry) {}

Gateway::Gateway(std::shared_ptr<Backend> backend, RetryPolicy retry)
    : backend_(std::move(backend)), retry_(retry) {
    if (!backend_) throw Error(ErrorCode::InvalidArgument, "gateway needs a backend");
    if (retry_.max_attempts < 1) throw Error(ErrorCode::InvalidArgument, "max_attempts must be >= 1");
}

ChatResponse Gateway::complete(const ChatRequest& request) {
    request.validate();
    logical_requests_.fetch_add(1);

    std::string last_failure;
    for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
        transport_attempts_.fetch_add(1);
        try {
            ChatResponse response = backend_->send(request);
            response.text = rstrip(std::move(response.text));
            if (response.text.empty()) response.finish_reason = FinishReason::Error;
            response.request_count = attempt;
            return response;
        } catch (const TransportFailure& failure) {
            last_failure = failure.what();
        }
        if (attempt < retry_.max_attempts && retry_.backoff_base_ms > 0)
            std::this_thread::sleep_for(
                std::chrono::milliseconds(static_cast<std::int64_t>(retry_.backoff_base_ms) << (attempt - 1)));
    }
    throw TransportExhaustedError(retry_.max_attempts, last_failure);
}

}  // namespace newsforge
