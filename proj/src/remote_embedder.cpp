#include <cmath>
#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "tierqa/backend.hpp"
#include "tierqa/solution_store.hpp"

namespace tierqa {

RemoteEmbedder::RemoteEmbedder(std::string base_url, std::string model, std::size_t dimension, std::string auth_env,
                               std::string path)
    : base_url_(std::move(base_url)),
      model_(std::move(model)),
      dimension_(dimension),
      auth_env_(std::move(auth_env)),
      path_(std::move(path)) {
    if (base_url_.empty()) throw std::invalid_argument("remote embedder requires base_url");
    if (dimension_ == 0) throw std::invalid_argument("remote embedder requires a positive dimension");
}

EmbeddingVector RemoteEmbedder::embed(std::string_view text) const {
    if (text.empty()) throw std::invalid_argument("cannot embed empty text");
    nlohmann::json body{{"model", model_}, {"input", std::string(text)}};

    httplib::Client client(base_url_);
    client.set_connection_timeout(std::chrono::seconds(30));
    client.set_read_timeout(std::chrono::seconds(60));
    httplib::Headers headers;
    if (!auth_env_.empty()) {
        const char* token = std::getenv(auth_env_.c_str());
        if (token == nullptr || *token == '\0')
            throw AuthError("auth token env var " + auth_env_ + " is not set");
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    auto res = client.Post(path_, headers, body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace),
                           "application/json");
    if (!res) throw TransportError("embedding request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw BackendError("embedding endpoint HTTP " + std::to_string(res->status));

    EmbeddingVector v;
    try {
        const auto j = nlohmann::json::parse(res->body);
        v.values = j.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw MalformedResponseError(std::string("malformed embedding response: ") + e.what());
    }
    if (v.values.size() != dimension_)
        throw MalformedResponseError("embedding has dimension " + std::to_string(v.values.size()) + ", expected " +
                                     std::to_string(dimension_));
    return v;
}

}  // namespace tierqa
