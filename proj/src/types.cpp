#include "tierqa/types.hpp"

#include <stdexcept>

namespace tierqa {

std::string_view to_string(Role role) {
    switch (role) {
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    case Role::executor: return "executor";
    }
    return "user";
}

Role role_from_string(std::string_view text) {
    if (text == "user") return Role::user;
    if (text == "assistant") return Role::assistant;
    if (text == "executor") return Role::executor;
    throw std::invalid_argument("unknown role: " + std::string(text));
}

std::string_view to_string(Termination t) {
    switch (t) {
    case Termination::sentinel: return "sentinel";
    case Termination::max_turns: return "max_turns";
    case Termination::context_overflow: return "context_overflow";
    case Termination::backend_error: return "backend_error";
    }
    return "max_turns";
}

Termination termination_from_string(std::string_view text) {
    if (text == "sentinel") return Termination::sentinel;
    if (text == "max_turns") return Termination::max_turns;
    if (text == "context_overflow") return Termination::context_overflow;
    if (text == "backend_error") return Termination::backend_error;
    throw std::invalid_argument("unknown termination: " + std::string(text));
}

std::string_view to_string(VerdictSourceKind k) {
    return k == VerdictSourceKind::human ? "human" : "judge";
}

int Conversation::assistant_turns() const {
    int n = 0;
    for (const auto& m : messages)
        if (m.role == Role::assistant) ++n;
    return n;
}

Money Conversation::cost() const {
    Money total;
    for (const auto& m : messages)
        if (m.cost) total += *m.cost;
    return total;
}

TokenUsage Conversation::usage() const {
    TokenUsage total;
    for (const auto& m : messages)
        if (m.usage) total += *m.usage;
    return total;
}

}  // namespace tierqa
