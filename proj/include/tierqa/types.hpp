#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tierqa/money.hpp"

namespace tierqa {

using Duration = std::chrono::nanoseconds;

/// An external API the assistant is told to use. The model only ever sees
/// `fake_key`; the real key is read from the environment variable named by
/// `real_key_ref` at execution time and never stored here.
struct ApiSpec {
    std::string name;
    std::string fake_key;      // 8 lowercase hex chars
    std::string real_key_ref;  // env var name

    bool operator==(const ApiSpec&) const = default;
};

struct Query {
    std::string id;
    std::string text;
    ApiSpec api;
    std::int64_t arrival_index = 0;
};

enum class Role { user, assistant, executor };

std::string_view to_string(Role role);
Role role_from_string(std::string_view text);

struct TokenUsage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;

    TokenUsage& operator+=(const TokenUsage& o) {
        prompt_tokens += o.prompt_tokens;
        completion_tokens += o.completion_tokens;
        return *this;
    }
    bool operator==(const TokenUsage&) const = default;
};

struct Message {
    Role role = Role::user;
    std::string content;
    int turn_index = 0;
    // Assistant messages only.
    std::optional<TokenUsage> usage;
    std::optional<Money> cost;
};

enum class Termination { sentinel, max_turns, context_overflow, backend_error };

std::string_view to_string(Termination t);
Termination termination_from_string(std::string_view text);

struct Conversation {
    std::string id;
    std::string query_id;
    int tier_index = 0;  // rank of the tier that produced it
    std::vector<Message> messages;
    Termination termination = Termination::max_turns;
    std::optional<std::string> final_code;  // fake-key form
    bool errored = false;
    std::string error;

    int assistant_turns() const;
    Money cost() const;
    TokenUsage usage() const;
};

enum class VerdictSourceKind { human, judge };

std::string_view to_string(VerdictSourceKind k);

struct Verdict {
    bool success = false;
    VerdictSourceKind source = VerdictSourceKind::judge;
    Duration latency{0};
    bool errored = false;
    std::string note;
};

}  // namespace tierqa
