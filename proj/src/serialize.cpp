#include "tierqa/serialize.hpp"

namespace tierqa {

using nlohmann::ordered_json;

namespace {

ordered_json usage_json(const TokenUsage& u) {
    return ordered_json{{"prompt_tokens", u.prompt_tokens}, {"completion_tokens", u.completion_tokens}};
}

}  // namespace

std::string dump(const ordered_json& j) { return j.dump(-1, ' ', false, ordered_json::error_handler_t::replace); }

ordered_json to_json(const Message& m) {
    ordered_json j{{"role", std::string(to_string(m.role))}, {"turn_index", m.turn_index}, {"content", m.content}};
    if (m.usage) j["usage"] = usage_json(*m.usage);
    if (m.cost) j["cost"] = m.cost->to_string();
    return j;
}

ordered_json to_json(const Conversation& c) {
    ordered_json j{{"id", c.id},
                   {"query_id", c.query_id},
                   {"tier", c.tier_index},
                   {"termination", std::string(to_string(c.termination))},
                   {"assistant_turns", c.assistant_turns()},
                   {"cost", c.cost().to_string()},
                   {"usage", usage_json(c.usage())}};
    j["final_code"] = c.final_code ? ordered_json(*c.final_code) : ordered_json(nullptr);
    j["errored"] = c.errored;
    if (c.errored) j["error"] = c.error;
    auto& msgs = j["messages"] = ordered_json::array();
    for (const auto& m : c.messages) msgs.push_back(to_json(m));
    return j;
}

Conversation conversation_from_json(const nlohmann::json& j) {
    Conversation c;
    c.id = j.at("id").get<std::string>();
    c.query_id = j.at("query_id").get<std::string>();
    c.tier_index = j.at("tier").get<int>();
    c.termination = termination_from_string(j.at("termination").get<std::string>());
    if (j.contains("final_code") && j.at("final_code").is_string()) c.final_code = j.at("final_code").get<std::string>();
    c.errored = j.value("errored", false);
    c.error = j.value("error", std::string{});
    for (const auto& mj : j.at("messages")) {
        Message m;
        m.role = role_from_string(mj.at("role").get<std::string>());
        m.turn_index = mj.at("turn_index").get<int>();
        m.content = mj.at("content").get<std::string>();
        if (mj.contains("usage"))
            m.usage = TokenUsage{mj.at("usage").at("prompt_tokens").get<std::int64_t>(),
                                 mj.at("usage").at("completion_tokens").get<std::int64_t>()};
        if (mj.contains("cost")) m.cost = Money::parse(mj.at("cost").get<std::string>());
        c.messages.push_back(std::move(m));
    }
    return c;
}

ordered_json to_json(const Verdict& v) {
    ordered_json j{{"success", v.success},
                   {"source", std::string(to_string(v.source))},
                   {"latency_ns", v.latency.count()},
                   {"errored", v.errored}};
    if (!v.note.empty()) j["note"] = v.note;
    return j;
}

ordered_json to_json(const Query& q) {
    return ordered_json{{"id", q.id},
                        {"query", q.text},
                        {"api_name", q.api.name},
                        {"fake_key", q.api.fake_key},
                        {"key_env", q.api.real_key_ref},
                        {"arrival_index", q.arrival_index}};
}

ordered_json to_json(const QueryResult& r) {
    ordered_json j{{"query_id", r.query_id}, {"verdict", to_json(r.verdict)}};
    j["tiers_attempted"] = r.tiers_attempted();
    ordered_json calls = ordered_json::object();
    for (const auto& [rank, n] : r.model_calls_per_rank) calls[std::to_string(rank)] = n;
    j["model_calls_per_rank"] = calls;
    j["cost"] = r.cost.to_string();
    j["judge_cost"] = r.judge_cost.to_string();
    j["wall_time_ns"] = r.wall_time.count();
    j["demo_used"] = r.demo_used ? ordered_json(*r.demo_used) : ordered_json(nullptr);
    j["initial_prompt"] = r.initial_prompt;
    j["errored"] = r.errored;
    j["stored"] = r.stored;
    auto& convs = j["conversations"] = ordered_json::array();
    for (const auto& c : r.conversations) convs.push_back(to_json(c));
    return j;
}

ordered_json to_json(const RunSummary& s) {
    ordered_json j{{"queries", s.queries},
                   {"successes", s.successes},
                   {"errored", s.errored},
                   {"success_rate", s.success_rate},
                   {"total_cost", s.total_cost.to_string()},
                   {"judge_cost", s.judge_cost.to_string()}};
    ordered_json calls = ordered_json::object();
    for (const auto& [rank, avg] : s.avg_model_calls_per_rank) calls[std::to_string(rank)] = avg;
    j["avg_model_calls_per_rank"] = calls;
    j["total_runtime_s"] = s.total_runtime_s;
    auto& curve = j["curve"] = ordered_json::array();
    for (const auto& p : s.curve)
        curve.push_back({{"queries_processed", p.queries_processed},
                         {"cumulative_successes", p.cumulative_successes},
                         {"cumulative_cost", p.cumulative_cost.to_string()}});
    return j;
}

ordered_json to_json(const SolutionRecord& r, bool redact_code) {
    return ordered_json{{"query_id", r.query_id},
                        {"query_text", r.query_text},
                        {"code", redact_code ? ordered_json("[redacted]") : ordered_json(r.code)},
                        {"solved_by_rank", r.solved_by_rank},
                        {"created_at", r.created_at}};
}

}  // namespace tierqa
