#include "tierqa/conversation.hpp"

#include <optional>

#include "tierqa/log.hpp"
#include "tierqa/text.hpp"

namespace tierqa {

const char* const kDefaultAssistantSystemPrompt =
    "You are a helpful AI assistant that solves tasks by writing code.\n"
    "When information has to be collected or computed, write a complete Python program in a "
    "```python code block. The user runs every code block you send and replies with the exit status "
    "and output; do not ask the user to change your code.\n"
    "If the result shows an error, fix it and send the full corrected program. If the task is not "
    "solved after the code ran, reconsider your approach.\n"
    "Use only one code block per message. When the task is done, give the final answer and end your "
    "message with TERMINATE.";

ChatRequest build_chat_request(const Conversation& conv, const std::string& system_prompt) {
    ChatRequest req;
    req.system_prompt = system_prompt;
    req.messages.reserve(conv.messages.size());
    for (const auto& m : conv.messages)
        req.messages.push_back({m.role == Role::assistant ? "assistant" : "user", m.content});
    return req;
}

bool classify_success_candidate(const Conversation& conv) {
    return conv.final_code.has_value() || conv.termination == Termination::sentinel;
}

Conversation run_conversation(const Tier& tier, Executor& executor, const Query& query,
                              const std::string& initial_prompt, const ConversationConfig& config,
                              const ConversationHooks& hooks, const RetryPolicy& retry) {
    if (config.max_turns < 1) throw std::invalid_argument("max_turns must be at least 1");

    Conversation conv;
    conv.query_id = query.id;
    conv.id = query.id + "/r" + std::to_string(tier.profile.rank);
    conv.tier_index = tier.profile.rank;

    auto append = [&](Message m) {
        conv.messages.push_back(std::move(m));
        if (hooks.on_message) hooks.on_message(conv, conv.messages.back());
    };
    append({Role::user, initial_prompt, 0, std::nullopt, std::nullopt});

    std::optional<ScopedWorkdir> workdir;
    const std::int64_t window = tier.profile.context_window;

    for (int turn = 1;; ++turn) {
        const ChatRequest request = build_chat_request(conv, config.system_prompt);
        if (estimate_prompt_tokens(request) + config.context_margin >= window) {
            conv.termination = Termination::context_overflow;
            break;
        }

        ChatExchange exchange;
        try {
            exchange = complete(*tier.backend, tier.profile, request, retry);
        } catch (const ContextOverflowError&) {
            conv.termination = Termination::context_overflow;
            break;
        } catch (const BackendError& e) {
            conv.termination = Termination::backend_error;
            conv.errored = true;
            conv.error = e.what();
            log_warn("conversation {} tier {}: backend error: {}", conv.id, tier.profile.rank, e.what());
            break;
        }

        const Money cost = cost_of(exchange, tier.profile);
        if (hooks.on_model_call) hooks.on_model_call(conv, exchange, cost);
        append({Role::assistant, exchange.response_text, turn, exchange.usage, cost});

        const std::string& reply = conv.messages.back().content;
        if (is_terminate(reply, config.sentinel)) {
            conv.termination = Termination::sentinel;
            break;
        }
        if (turn >= config.max_turns) {
            conv.termination = Termination::max_turns;
            break;
        }

        const CodeExtraction code = extract_code(reply);
        if (code.unterminated_fence) log_warn("conversation {} turn {}: unterminated code fence", conv.id, turn);
        std::optional<ExecutionResult> result;
        if (!code.blocks.empty()) {
            const std::string program = joined_program(code.blocks);
            if (!workdir && executor.needs_workdir()) workdir.emplace(executor.scratch_root());
            result = executor.run(program, query.api, workdir ? workdir->path() : std::filesystem::path{});
            conv.final_code = program;
            if (hooks.on_execution) hooks.on_execution(conv, *result);
        }
        append({Role::executor, format_executor_reply(result), turn, std::nullopt, std::nullopt});
    }
    return conv;
}

}  // namespace tierqa
