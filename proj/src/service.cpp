#include "tierqa/service.hpp"

#include <httplib.h>

#include "tierqa/log.hpp"
#include "tierqa/serialize.hpp"

namespace tierqa {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(QueryStatus s) {
    switch (s) {
        case QueryStatus::queued: return "queued";
        case QueryStatus::running: return "running";
        case QueryStatus::awaiting_verdict: return "awaiting_verdict";
        case QueryStatus::done: return "done";
        case QueryStatus::resumed: return "resumed";
        case QueryStatus::aborted: return "aborted";
    }
    return "unknown";
}

namespace {

void send_json(httplib::Response& res, const ordered_json& j, int status = 200) {
    res.status = status;
    res.set_content(dump(j), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, ordered_json{{"error", message}}, status);
}

std::string sse_frame(const ServiceEvent& e) {
    return "id: " + std::to_string(e.seq) + "\nevent: " + e.type + "\ndata: " + dump(e.data) + "\n\n";
}

}  // namespace

Service::Service(std::unique_ptr<Runtime> runtime) : runtime_(std::move(runtime)), server_(std::make_unique<httplib::Server>()) {
    for (const auto& e : runtime_->ledger->entries())
        if (e.event == LedgerEvent::verdict && e.final) done_in_ledger_.insert(e.query_id);
    // httplib defaults to SO_REUSEPORT, which lets a second instance share a busy port.
    server_->set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });

    PipelineEvents ev;
    ev.on_query_start = [this](const Query& q) { emit(q.id, "query_start", to_json(q)); };
    ev.on_tier_start = [this](const Query& q, int rank) {
        set_status(q.id, QueryStatus::running);
        emit(q.id, "tier_start", ordered_json{{"tier", rank}});
    };
    ev.on_message = [this](const Query& q, const Conversation& c, const Message& m) {
        ordered_json j = to_json(m);
        j["tier"] = c.tier_index;
        j["conversation_id"] = c.id;
        emit(q.id, "message", std::move(j));
    };
    ev.on_awaiting_verdict = [this](const Query& q, int rank) {
        set_status(q.id, QueryStatus::awaiting_verdict);
        emit(q.id, "awaiting_verdict", ordered_json{{"tier", rank}});
    };
    ev.on_verdict = [this](const Query& q, int rank, const Verdict& v) {
        set_status(q.id, QueryStatus::running);
        ordered_json j = to_json(v);
        j["tier"] = rank;
        emit(q.id, "verdict", std::move(j));
    };
    ev.on_query_done = [this](const QueryResult& r) {
        ordered_json j = to_json(r);
        {
            std::lock_guard lock(mutex_);
            queries_[r.query_id].result = j;
        }
        ordered_json brief{{"query_id", r.query_id},
                           {"success", r.verdict.success},
                           {"errored", r.errored},
                           {"cost", r.cost.to_string()},
                           {"tiers_attempted", r.tiers_attempted()},
                           {"stored", r.stored}};
        emit(r.query_id, "query_done", std::move(brief));
    };
    runtime_->pipeline->set_events(std::move(ev));
    install_routes();
}

Service::~Service() { stop(); }

void Service::emit(const std::string& id, const std::string& type, ordered_json data) {
    {
        std::lock_guard lock(mutex_);
        auto& st = queries_[id];
        st.events.push_back({static_cast<std::int64_t>(st.events.size()), type, std::move(data)});
    }
    cv_.notify_all();
}

void Service::set_status(const std::string& id, QueryStatus s) {
    {
        std::lock_guard lock(mutex_);
        queries_[id].status = s;
    }
    cv_.notify_all();
}

std::string Service::submit(Query query) {
    std::lock_guard lock(mutex_);
    if (stopping_) throw ServiceError(503, "service is stopping");
    if (queries_.count(query.id)) throw ServiceError(409, "query id '" + query.id + "' already submitted");
    query.arrival_index = next_arrival_++;
    const std::string id = query.id;
    QueryState st;
    st.query = std::move(query);
    queries_.emplace(id, std::move(st));
    order_.push_back(id);
    queue_.push_back(id);
    cv_.notify_all();
    return id;
}

std::string Service::submit_json(const json& body) {
    if (!body.is_object()) throw ServiceError(400, "expected a JSON object");
    auto str = [&](const char* key, bool required) -> std::string {
        if (!body.contains(key) || body.at(key).is_null()) {
            if (required) throw ServiceError(400, std::string("missing field '") + key + "'");
            return {};
        }
        if (!body.at(key).is_string()) throw ServiceError(400, std::string("field '") + key + "' must be a string");
        return body.at(key).get<std::string>();
    };
    std::string id = str("id", false);
    if (id.empty()) {
        std::lock_guard lock(mutex_);
        id = "q" + std::to_string(next_arrival_);
        while (queries_.count(id)) id += "_";
    }
    Query q;
    try {
        q = make_query(id, str("query", true), str("api_name", true), str("key_env", false), 0, *runtime_->keys);
    } catch (const DatasetError& e) {
        throw ServiceError(400, e.what());
    }
    return submit(std::move(q));
}

void Service::post_feedback(const std::string& query_id, bool success, const std::string& note) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
    for (;;) {
        QueryStatus status;
        {
            std::lock_guard lock(mutex_);
            auto it = queries_.find(query_id);
            if (it == queries_.end()) throw ServiceError(404, "unknown query '" + query_id + "'");
            status = it->second.status;
        }
        if (!runtime_->channel) throw ServiceError(409, "service is not in human feedback mode");
        if (status != QueryStatus::awaiting_verdict) throw ServiceError(409, "no verdict pending for '" + query_id + "'");
        switch (runtime_->channel->post(query_id, success, note)) {
            case FeedbackStatus::accepted:
                return;
            case FeedbackStatus::closed:
                throw ServiceError(503, "feedback channel closed");
            case FeedbackStatus::not_pending:
                break;
        }
        // The awaiting event precedes the channel wait by a few instructions.
        if (std::chrono::steady_clock::now() > deadline)
            throw ServiceError(409, "no verdict pending for '" + query_id + "'");
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
}

std::optional<ordered_json> Service::query_view(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = queries_.find(id);
    if (it == queries_.end()) return std::nullopt;
    ordered_json j{{"id", id}, {"status", std::string(to_string(it->second.status))}};
    j["query"] = to_json(it->second.query);
    j["events"] = it->second.events.size();
    if (it->second.result) j["result"] = *it->second.result;
    return j;
}

std::vector<ServiceEvent> Service::events_after(const std::string& id, std::int64_t after) const {
    std::lock_guard lock(mutex_);
    auto it = queries_.find(id);
    if (it == queries_.end()) return {};
    std::vector<ServiceEvent> out;
    for (const auto& e : it->second.events)
        if (e.seq > after) out.push_back(e);
    return out;
}

ordered_json Service::metrics() const { return to_json(summarize(runtime_->ledger->entries())); }

std::string Service::curves_csv() const { return curve_export(runtime_->config.label, runtime_->ledger->entries()); }

ordered_json Service::store_view(bool redact) const {
    ordered_json j{{"records", ordered_json::array()}};
    for (const auto& r : runtime_->store->records()) j["records"].push_back(to_json(r, redact));
    return j;
}

ordered_json Service::health() const {
    std::lock_guard lock(mutex_);
    ordered_json j{{"status", fatal_.empty() ? "ok" : "failed"}, {"label", runtime_->config.label}};
    j["active"] = active_ ? ordered_json(*active_) : ordered_json(nullptr);
    j["queued"] = queue_.size();
    if (!fatal_.empty()) j["error"] = fatal_;
    return j;
}

bool Service::wait_idle(std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mutex_);
    return cv_.wait_for(lock, timeout, [&] { return (queue_.empty() && !active_) || !fatal_.empty(); });
}

void Service::worker_loop() {
    for (;;) {
        Query q;
        {
            std::unique_lock lock(mutex_);
            cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
            if (stopping_) return;
            const std::string id = queue_.front();
            queue_.pop_front();
            auto& st = queries_[id];
            if (done_in_ledger_.count(id)) {
                st.status = QueryStatus::resumed;
                cv_.notify_all();
                continue;
            }
            st.status = QueryStatus::running;
            active_ = id;
            q = st.query;
        }
        QueryStatus final_status = QueryStatus::done;
        try {
            runtime_->pipeline->process_query(q);
        } catch (const ChannelClosed& e) {
            final_status = QueryStatus::aborted;
            log_warn("query {} aborted: {}", q.id, e.what());
        } catch (const std::exception& e) {
            // Interpreter or ledger failures end the stream.
            final_status = QueryStatus::aborted;
            log_error("query {} failed: {}", q.id, e.what());
            std::lock_guard lock(mutex_);
            fatal_ = e.what();
        }
        {
            std::lock_guard lock(mutex_);
            queries_[q.id].status = final_status;
            active_.reset();
            if (final_status == QueryStatus::aborted) {
                // Nothing after an abort can run.
                for (const auto& id : queue_) queries_[id].status = QueryStatus::aborted;
                queue_.clear();
                stopping_ = true;
            }
        }
        if (final_status == QueryStatus::aborted) emit(q.id, "query_done", ordered_json{{"query_id", q.id}, {"aborted", true}});
        cv_.notify_all();
        if (final_status == QueryStatus::aborted) return;
    }
}

void Service::install_routes() {
    auto& s = *server_;
    s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const ServiceError& e) {
            send_error(res, e.status(), e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, e.what());
        }
    });

    s.Post("/api/queries", [this](const httplib::Request& req, httplib::Response& res) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception&) {
            return send_error(res, 400, "body is not valid JSON");
        }
        const std::string id = submit_json(body);
        std::size_t position = 0;
        {
            std::lock_guard lock(mutex_);
            position = queue_.size();
        }
        send_json(res, ordered_json{{"id", id}, {"position", position}}, 202);
    });

    s.Get("/api/queries", [this](const httplib::Request&, httplib::Response& res) {
        ordered_json list = ordered_json::array();
        {
            std::lock_guard lock(mutex_);
            for (const auto& id : order_)
                list.push_back({{"id", id}, {"status", std::string(to_string(queries_.at(id).status))}});
        }
        send_json(res, ordered_json{{"queries", list}});
    });

    s.Get(R"(/api/queries/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        auto view = query_view(req.matches[1]);
        if (!view) return send_error(res, 404, "unknown query");
        send_json(res, *view);
    });

    s.Get(R"(/api/queries/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        std::int64_t after = -1;
        try {
            if (req.has_param("after")) after = std::stoll(req.get_param_value("after"));
            else if (req.has_header("Last-Event-ID")) after = std::stoll(req.get_header_value("Last-Event-ID"));
        } catch (const std::exception&) {
            return send_error(res, 400, "invalid event cursor");
        }
        {
            std::lock_guard lock(mutex_);
            if (!queries_.count(id)) return send_error(res, 404, "unknown query");
        }
        auto cursor = std::make_shared<std::int64_t>(after);
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider("text/event-stream", [this, id, cursor](std::size_t, httplib::DataSink& sink) {
            std::vector<ServiceEvent> batch;
            bool over = false;
            {
                std::unique_lock lock(mutex_);
                cv_.wait_for(lock, std::chrono::milliseconds(500), [&] {
                    const auto& st = queries_.at(id);
                    return stopping_ || finished(st.status) ||
                           (!st.events.empty() && st.events.back().seq > *cursor);
                });
                const auto& st = queries_.at(id);
                for (const auto& e : st.events)
                    if (e.seq > *cursor) batch.push_back(e);
                over = finished(st.status) || stopping_;
            }
            for (const auto& e : batch) {
                const std::string frame = sse_frame(e);
                if (!sink.write(frame.data(), frame.size())) return false;
                *cursor = e.seq;
            }
            if (over) {
                sink.done();
                return true;
            }
            if (batch.empty()) {
                static const std::string keepalive = ": keepalive\n\n";
                if (!sink.write(keepalive.data(), keepalive.size())) return false;
            }
            return true;
        });
    });

    s.Post("/api/feedback", [this](const httplib::Request& req, httplib::Response& res) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception&) {
            return send_error(res, 400, "body is not valid JSON");
        }
        if (!body.is_object() || !body.contains("query_id") || !body.at("query_id").is_string() ||
            !body.contains("success") || !body.at("success").is_boolean())
            return send_error(res, 400, "expected {\"query_id\": string, \"success\": bool}");
        const std::string id = body.at("query_id").get<std::string>();
        std::string note;
        if (body.contains("note") && body.at("note").is_string()) note = body.at("note").get<std::string>();
        post_feedback(id, body.at("success").get<bool>(), note);
        send_json(res, ordered_json{{"query_id", id}, {"accepted", true}});
    });

    s.Get("/api/metrics", [this](const httplib::Request&, httplib::Response& res) { send_json(res, metrics()); });

    s.Get("/api/curves", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(curves_csv(), "text/csv");
    });

    s.Get("/api/store", [this](const httplib::Request& req, httplib::Response& res) {
        const bool redact = req.has_param("redact") && req.get_param_value("redact") != "0";
        send_json(res, store_view(redact));
    });

    s.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) { send_json(res, health()); });
}

int Service::start(const std::string& host, int port) {
    if (started_) throw ServiceError(500, "service already started");
    int bound = port;
    if (port == 0) {
        bound = server_->bind_to_any_port(host);
        if (bound <= 0) throw ServiceError(500, "cannot bind " + host);
    } else if (!server_->bind_to_port(host, port)) {
        throw ServiceError(500, "cannot bind " + host + ":" + std::to_string(port) + " (port busy?)");
    }
    started_ = true;
    if (runtime_->config.service.preload_dataset)
        for (const auto& q : runtime_->queries) submit(q);
    worker_ = std::thread([this] { worker_loop(); });
    listener_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    log_info("service '{}' listening on {}:{}", runtime_->config.label, host, bound);
    return bound;
}

void Service::stop() {
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
    }
    cv_.notify_all();
    if (runtime_ && runtime_->channel) runtime_->channel->close();
    if (worker_.joinable()) worker_.join();
    if (server_) server_->stop();
    if (listener_.joinable()) listener_.join();
}

void Service::wait() {
    if (listener_.joinable()) listener_.join();
}

}  // namespace tierqa
