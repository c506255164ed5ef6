#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "tierqa/backend.hpp"

namespace tierqa {

RemoteChatBackend::RemoteChatBackend(RemoteBackendConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw std::invalid_argument("remote backend requires base_url");
}

BackendReply RemoteChatBackend::chat(const ModelProfile& profile, const ChatRequest& request) {
    nlohmann::json body;
    body["model"] = config_.model.empty() ? profile.name : config_.model;
    auto& messages = body["messages"] = nlohmann::json::array();
    if (!request.system_prompt.empty())
        messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
    for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});

    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    httplib::Headers headers;
    if (!config_.auth_env.empty()) {
        const char* token = std::getenv(config_.auth_env.c_str());
        if (token == nullptr || *token == '\0')
            throw AuthError("auth token env var " + config_.auth_env + " is not set");
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    auto res = client.Post(config_.path, headers, body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace),
                           "application/json");
    if (!res) throw TransportError("request to " + config_.base_url + " failed: " + httplib::to_string(res.error()));

    const int status = res->status;
    if (status == 401 || status == 403) throw AuthError("backend rejected credentials (HTTP " + std::to_string(status) + ")");
    if (status == 429 || status >= 500) throw TransportError("backend HTTP " + std::to_string(status));
    if (status == 400 && res->body.find("context_length") != std::string::npos)
        throw ContextOverflowError("backend reports context length exceeded");
    if (status != 200) throw BackendError("backend HTTP " + std::to_string(status));

    try {
        const auto j = nlohmann::json::parse(res->body);
        BackendReply reply;
        const auto& content = j.at("choices").at(0).at("message").at("content");
        reply.text = content.is_null() ? std::string{} : content.get<std::string>();
        if (j.contains("usage") && j.at("usage").is_object()) {
            const auto& u = j.at("usage");
            reply.usage = TokenUsage{u.value("prompt_tokens", std::int64_t{0}),
                                     u.value("completion_tokens", std::int64_t{0})};
        }
        return reply;
    } catch (const nlohmann::json::exception& e) {
        throw MalformedResponseError(std::string("malformed chat response: ") + e.what());
    }
}

}  // namespace tierqa
