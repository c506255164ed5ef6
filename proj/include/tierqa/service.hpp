#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tierqa/replay.hpp"

namespace httplib {
class Server;
}

namespace tierqa {

// HTTP API (JSON unless noted):
//   POST /api/queries              {"id"?, "query", "api_name", "key_env"?} -> 202 {"id", "position"}
//   GET  /api/queries              -> {"queries": [{"id", "status"}]}
//   GET  /api/queries/{id}         -> {"id", "status", "query", "result"?}
//   GET  /api/queries/{id}/events  -> text/event-stream; "?after=N" or Last-Event-ID resumes
//   POST /api/feedback             {"query_id", "success", "note"?} -> 200 | 400 | 404 | 409 | 503
//   GET  /api/metrics              -> run summary (zeroed before the first query)
//   GET  /api/curves               -> text/csv curve export
//   GET  /api/store[?redact=1]     -> {"records": [...]}
//   GET  /api/health               -> {"status", "active", "queued", "label"}
//
// Event types, in order per query: query_start, tier_start, message...,
// awaiting_verdict?, verdict, (tier_start ...), query_done. Each event
// carries a per-query sequence number starting at 0.

struct ServiceEvent {
    std::int64_t seq = 0;
    std::string type;
    nlohmann::ordered_json data;
};

enum class QueryStatus { queued, running, awaiting_verdict, done, resumed, aborted };
std::string_view to_string(QueryStatus s);

class ServiceError : public std::runtime_error {
public:
    ServiceError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
    int status() const { return status_; }

private:
    int status_;
};

class Service {
public:
    explicit Service(std::unique_ptr<Runtime> runtime);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds (port 0 picks a free port) and starts the worker and listener.
    /// Throws ServiceError if the port is busy. Returns the bound port.
    int start(const std::string& host, int port);
    void stop();
    /// Blocks until stop() or the listener exits.
    void wait();

    // Operations behind the HTTP endpoints.
    std::string submit(Query query);  // throws ServiceError 409 on a duplicate id
    std::string submit_json(const nlohmann::json& body);
    void post_feedback(const std::string& query_id, bool success, const std::string& note);
    std::optional<nlohmann::ordered_json> query_view(const std::string& id) const;
    std::vector<ServiceEvent> events_after(const std::string& id, std::int64_t after) const;
    nlohmann::ordered_json metrics() const;
    std::string curves_csv() const;
    nlohmann::ordered_json store_view(bool redact) const;
    nlohmann::ordered_json health() const;

    /// Blocks until every queued query is finished or the timeout passes.
    bool wait_idle(std::chrono::milliseconds timeout) const;
    Runtime& runtime() { return *runtime_; }

private:
    struct QueryState {
        Query query;
        QueryStatus status = QueryStatus::queued;
        std::vector<ServiceEvent> events;
        std::optional<nlohmann::ordered_json> result;
    };

    void worker_loop();
    void emit(const std::string& id, const std::string& type, nlohmann::ordered_json data);
    void set_status(const std::string& id, QueryStatus s);
    void install_routes();
    bool finished(QueryStatus s) const {
        return s == QueryStatus::done || s == QueryStatus::resumed || s == QueryStatus::aborted;
    }

    std::unique_ptr<Runtime> runtime_;
    std::unique_ptr<httplib::Server> server_;
    std::thread listener_;
    std::thread worker_;

    mutable std::mutex mutex_;
    mutable std::condition_variable cv_;
    std::map<std::string, QueryState> queries_;
    std::vector<std::string> order_;
    std::deque<std::string> queue_;
    std::set<std::string> done_in_ledger_;
    std::optional<std::string> active_;
    std::int64_t next_arrival_ = 0;
    std::string fatal_;
    bool stopping_ = false;
    bool started_ = false;
};

}  // namespace tierqa
