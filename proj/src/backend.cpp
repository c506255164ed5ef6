#include "tierqa/backend.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace tierqa {

std::vector<ModelProfile> validate_hierarchy(std::vector<ModelProfile> profiles) {
    if (profiles.empty()) throw std::invalid_argument("hierarchy must contain at least one model");
    std::set<int> ranks;
    for (const auto& p : profiles) {
        if (p.context_window <= 0)
            throw std::invalid_argument("model '" + p.name + "' has nonpositive context_window");
        if (p.rank < 0) throw std::invalid_argument("model '" + p.name + "' has negative rank");
        if (!ranks.insert(p.rank).second)
            throw std::invalid_argument("duplicate hierarchy rank " + std::to_string(p.rank));
    }
    std::sort(profiles.begin(), profiles.end(),
              [](const ModelProfile& a, const ModelProfile& b) { return a.rank < b.rank; });
    return profiles;
}

std::int64_t estimate_tokens(std::string_view text) {
    return static_cast<std::int64_t>((text.size() + 3) / 4);
}

std::int64_t estimate_prompt_tokens(const ChatRequest& request) {
    std::int64_t total = estimate_tokens(request.system_prompt);
    for (const auto& m : request.messages) total += estimate_tokens(m.content);
    return total;
}

Money cost_of(const TokenUsage& usage, const ModelProfile& profile) {
    return profile.price_in.cost(usage.prompt_tokens) + profile.price_out.cost(usage.completion_tokens);
}

ChatExchange complete(ChatBackend& backend, const ModelProfile& profile, const ChatRequest& request,
                      const RetryPolicy& retry) {
    const std::int64_t estimated = estimate_prompt_tokens(request);
    if (estimated >= profile.context_window) {
        throw ContextOverflowError("prompt of ~" + std::to_string(estimated) +
                                   " tokens exceeds context window " +
                                   std::to_string(profile.context_window) + " of " + profile.name);
    }

    const auto start = std::chrono::steady_clock::now();
    auto delay = retry.base_delay;
    BackendReply reply;
    for (int attempt = 0;; ++attempt) {
        try {
            reply = backend.chat(profile, request);
            break;
        } catch (const TransportError&) {
            if (attempt >= retry.retries) throw;
            if (retry.sleep)
                retry.sleep(delay);
            else
                std::this_thread::sleep_for(delay);
            delay *= 2;
        }
    }

    ChatExchange ex;
    ex.request_messages = request.messages;
    ex.response_text = std::move(reply.text);
    if (reply.usage) {
        if (reply.usage->prompt_tokens < 0 || reply.usage->completion_tokens < 0)
            throw MalformedResponseError("negative token usage from " + profile.name);
        ex.usage = *reply.usage;
    } else {
        ex.usage = {estimated, estimate_tokens(ex.response_text)};
        ex.usage_estimated = true;
    }
    ex.wall_time = std::chrono::duration_cast<Duration>(std::chrono::steady_clock::now() - start);
    return ex;
}

SequenceBackend::SequenceBackend(std::vector<std::string> script, std::optional<std::string> fallback)
    : script_(std::move(script)), fallback_(std::move(fallback)) {}

BackendReply SequenceBackend::chat(const ModelProfile&, const ChatRequest&) {
    std::lock_guard lock(mutex_);
    if (next_ < script_.size()) return {script_[next_++], std::nullopt};
    if (fallback_) return {*fallback_, std::nullopt};
    throw BackendError("scripted backend exhausted after " + std::to_string(script_.size()) + " replies");
}

std::size_t SequenceBackend::consumed() const {
    std::lock_guard lock(mutex_);
    return next_;
}

RuleBackend::RuleBackend(std::vector<ScriptRule> rules, std::string default_response)
    : rules_(std::move(rules)), default_(std::move(default_response)) {}

BackendReply RuleBackend::chat(const ModelProfile&, const ChatRequest& request) {
    const std::string_view latest =
        request.messages.empty() ? std::string_view{} : std::string_view{request.messages.back().content};
    for (const auto& rule : rules_) {
        if (!rule.match || latest.find(*rule.match) != std::string_view::npos) return {rule.respond, std::nullopt};
    }
    return {default_, std::nullopt};
}

std::unique_ptr<ChatBackend> scripted_backend_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("scripted backend: ") + e.what());
    }
    std::optional<std::string> fallback;
    if (j.contains("default")) fallback = j.at("default").get<std::string>();
    if (j.contains("sequence")) {
        return std::make_unique<SequenceBackend>(j.at("sequence").get<std::vector<std::string>>(), fallback);
    }
    if (!j.contains("rules") && !fallback)
        throw std::invalid_argument("scripted backend needs 'rules', 'sequence' or 'default'");
    std::vector<ScriptRule> rules;
    for (const auto& r : j.value("rules", nlohmann::json::array())) {
        ScriptRule rule;
        if (r.contains("match") && !r.at("match").is_null()) rule.match = r.at("match").get<std::string>();
        rule.respond = r.at("respond").get<std::string>();
        rules.push_back(std::move(rule));
    }
    return std::make_unique<RuleBackend>(std::move(rules), fallback.value_or(""));
}

std::unique_ptr<ChatBackend> load_scripted_backend(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open scripted backend file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return scripted_backend_from_json(ss.str());
}

RecordingBackend::RecordingBackend(std::shared_ptr<ChatBackend> inner) : inner_(std::move(inner)) {}

BackendReply RecordingBackend::chat(const ModelProfile& profile, const ChatRequest& request) {
    {
        std::lock_guard lock(mutex_);
        calls_.push_back({profile.name, request});
    }
    return inner_->chat(profile, request);
}

std::vector<RecordingBackend::Call> RecordingBackend::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

}  // namespace tierqa
