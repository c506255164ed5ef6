#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tierqa/money.hpp"
#include "tierqa/types.hpp"

namespace tierqa {

/// Pricing and limits of one model; `rank` is its position in the hierarchy
/// (0 = cheapest).
struct ModelProfile {
    std::string name;
    TokenPrice price_in;   // prompt tokens
    TokenPrice price_out;  // completion tokens
    std::int64_t context_window = 8192;
    int rank = 0;
};

/// Throws std::invalid_argument if the profile set is empty, a context window
/// is nonpositive, or ranks are not unique. Returns the profiles sorted by rank.
std::vector<ModelProfile> validate_hierarchy(std::vector<ModelProfile> profiles);

struct ChatMessage {
    std::string role;  // "user" | "assistant"
    std::string content;
};

struct ChatRequest {
    std::string system_prompt;
    std::vector<ChatMessage> messages;
};

struct BackendReply {
    std::string text;
    std::optional<TokenUsage> usage;  // absent when the service reports none
};

struct ChatExchange {
    std::vector<ChatMessage> request_messages;
    std::string response_text;
    TokenUsage usage;
    bool usage_estimated = false;
    Duration wall_time{0};
};

class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The prompt does not fit the model's context window.
class ContextOverflowError : public BackendError {
public:
    using BackendError::BackendError;
};

/// Connection-level failure; the only error class that is retried.
class TransportError : public BackendError {
public:
    using BackendError::BackendError;
};

class AuthError : public BackendError {
public:
    using BackendError::BackendError;
};

class MalformedResponseError : public BackendError {
public:
    using BackendError::BackendError;
};

/// Raw chat-completion transport. Implementations must be safe to call from
/// several threads.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual BackendReply chat(const ModelProfile& profile, const ChatRequest& request) = 0;
};

struct RetryPolicy {
    int retries = 3;
    std::chrono::milliseconds base_delay{1000};  // doubled after each retry
    std::function<void(std::chrono::milliseconds)> sleep;  // defaults to this_thread::sleep_for
};

/// ceil(byte_length / 4).
std::int64_t estimate_tokens(std::string_view text);

std::int64_t estimate_prompt_tokens(const ChatRequest& request);

Money cost_of(const TokenUsage& usage, const ModelProfile& profile);

inline Money cost_of(const ChatExchange& exchange, const ModelProfile& profile) {
    return cost_of(exchange.usage, profile);
}

/// One completion with the context check, transport retries, and usage
/// estimation when the backend reports none. Throws ContextOverflowError when
/// the estimated prompt is not strictly below the context window.
ChatExchange complete(ChatBackend& backend, const ModelProfile& profile, const ChatRequest& request,
                      const RetryPolicy& retry = {});

// ---------------------------------------------------------------------------
// Scripted backends
// ---------------------------------------------------------------------------

/// Replays a fixed list of responses in order; once exhausted, returns
/// `fallback` (or throws BackendError when no fallback is set).
class SequenceBackend : public ChatBackend {
public:
    explicit SequenceBackend(std::vector<std::string> script,
                             std::optional<std::string> fallback = std::nullopt);
    BackendReply chat(const ModelProfile& profile, const ChatRequest& request) override;
    std::size_t consumed() const;

private:
    std::vector<std::string> script_;
    std::optional<std::string> fallback_;
    mutable std::mutex mutex_;
    std::size_t next_ = 0;
};

struct ScriptRule {
    std::optional<std::string> match;  // substring of the latest message
    std::string respond;
};

/// Answers with the first rule whose `match` occurs in the latest request
/// message, else with the default response.
class RuleBackend : public ChatBackend {
public:
    RuleBackend(std::vector<ScriptRule> rules, std::string default_response);
    BackendReply chat(const ModelProfile& profile, const ChatRequest& request) override;

private:
    std::vector<ScriptRule> rules_;
    std::string default_;
};

/// Loads a scripted backend from a JSON file:
///   {"rules": [{"match": "...", "respond": "..."}], "default": "..."}
/// or {"sequence": ["...", ...], "default": "..."}.
std::unique_ptr<ChatBackend> load_scripted_backend(const std::string& path);
std::unique_ptr<ChatBackend> scripted_backend_from_json(const std::string& json_text);

/// Decorator that records every request it forwards.
class RecordingBackend : public ChatBackend {
public:
    struct Call {
        std::string model;
        ChatRequest request;
    };

    explicit RecordingBackend(std::shared_ptr<ChatBackend> inner);
    BackendReply chat(const ModelProfile& profile, const ChatRequest& request) override;
    std::vector<Call> calls() const;

private:
    std::shared_ptr<ChatBackend> inner_;
    mutable std::mutex mutex_;
    std::vector<Call> calls_;
};

// ---------------------------------------------------------------------------
// Remote backend
// ---------------------------------------------------------------------------

struct RemoteBackendConfig {
    std::string base_url;  // e.g. https://api.openai.com
    std::string path = "/v1/chat/completions";
    std::string model;     // remote model id; falls back to profile name
    std::string auth_env;  // env var holding the bearer token; optional
    std::chrono::seconds timeout{120};
};

/// Chat-completions HTTP client (OpenAI-compatible wire format).
class RemoteChatBackend : public ChatBackend {
public:
    explicit RemoteChatBackend(RemoteBackendConfig config);
    BackendReply chat(const ModelProfile& profile, const ChatRequest& request) override;

private:
    RemoteBackendConfig config_;
};

}  // namespace tierqa
