#pragma once

#include <functional>
#include <memory>
#include <string>

#include "tierqa/backend.hpp"
#include "tierqa/executor.hpp"
#include "tierqa/text.hpp"
#include "tierqa/types.hpp"

namespace tierqa {

/// Default assistant system prompt: code in fenced blocks, refine from the
/// execution results, end with the sentinel once the task is complete.
extern const char* const kDefaultAssistantSystemPrompt;

struct ConversationConfig {
    int max_turns = 5;  // assistant turns
    std::string sentinel = std::string(kSentinel);
    std::int64_t context_margin = 256;  // tokens reserved for the reply
    std::string system_prompt = kDefaultAssistantSystemPrompt;
};

/// One hierarchy position: a priced profile bound to a transport.
struct Tier {
    ModelProfile profile;
    std::shared_ptr<ChatBackend> backend;
};

struct ConversationHooks {
    std::function<void(const Conversation&, const Message&)> on_message;
    std::function<void(const Conversation&, const ChatExchange&, Money)> on_model_call;
    std::function<void(const Conversation&, const ExecutionResult&)> on_execution;
};

/// Drives one assistant/executor exchange until the sentinel, the turn limit,
/// or the context window ends it. Backend failures end the conversation with
/// `errored` set; they are never thrown. InterpreterError propagates.
Conversation run_conversation(const Tier& tier, Executor& executor, const Query& query,
                              const std::string& initial_prompt, const ConversationConfig& config,
                              const ConversationHooks& hooks = {}, const RetryPolicy& retry = {});

/// False only when the conversation never executed code and did not end with
/// the sentinel; such a conversation fails without consulting a verdict source.
bool classify_success_candidate(const Conversation& conv);

/// Chat request for the next assistant turn. Executor messages travel with
/// the "user" role.
ChatRequest build_chat_request(const Conversation& conv, const std::string& system_prompt);

}  // namespace tierqa
