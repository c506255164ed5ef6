#include <doctest.h>

#include <httplib.h>

#include <thread>

#include "fixtures.hpp"
#include "test_support.hpp"
#include "tierqa/config.hpp"
#include "tierqa/service.hpp"

using namespace tierqa;
using namespace std::chrono_literals;
using testing::TempDir;

namespace {

struct Running {
    std::unique_ptr<Service> service;
    int port = 0;

    explicit Running(const RunConfig& config, RuntimeOptions options = {}) {
        service = std::make_unique<Service>(build_runtime(config, options));
        port = service->start("127.0.0.1", 0);
    }
    ~Running() { service->stop(); }

    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(10, 0);
        return c;
    }
};

struct SseEvent {
    std::int64_t id = -1;
    std::string type;
    nlohmann::json data;
};

std::vector<SseEvent> parse_sse(const std::string& body) {
    std::vector<SseEvent> out;
    std::size_t pos = 0;
    while (true) {
        const auto end = body.find("\n\n", pos);
        if (end == std::string::npos) break;
        SseEvent ev;
        std::istringstream frame(body.substr(pos, end - pos));
        for (std::string line; std::getline(frame, line);) {
            if (line.rfind("id: ", 0) == 0) ev.id = std::stoll(line.substr(4));
            else if (line.rfind("event: ", 0) == 0) ev.type = line.substr(7);
            else if (line.rfind("data: ", 0) == 0) ev.data = nlohmann::json::parse(line.substr(6));
        }
        if (!ev.type.empty()) out.push_back(ev);
        pos = end + 2;
    }
    return out;
}

/// Reads the event stream until `stop_type` arrives.
std::vector<SseEvent> read_events(const httplib::Client& base, int port, const std::string& id,
                                  const std::string& stop_type, std::int64_t after = -1) {
    (void)base;
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(10, 0);
    std::string buffer;
    std::vector<SseEvent> events;
    const std::string path = "/api/queries/" + id + "/events" + (after >= 0 ? "?after=" + std::to_string(after) : "");
    c.Get(path.c_str(), [&](const char* data, std::size_t n) {
        buffer.append(data, n);
        events = parse_sse(buffer);
        return events.empty() || events.back().type != stop_type;
    });
    return events;
}

std::string wait_for_status(httplib::Client& c, const std::string& id, const std::string& want) {
    std::string status;
    for (int i = 0; i < 500; ++i) {
        auto r = c.Get(("/api/queries/" + id).c_str());
        if (r && r->status == 200) {
            status = nlohmann::json::parse(r->body).at("status");
            if (status == want) return status;
        }
        std::this_thread::sleep_for(10ms);
    }
    return status;
}

httplib::Result post_json(httplib::Client& c, const std::string& path, const nlohmann::json& body) {
    return c.Post(path.c_str(), body.dump(), "application/json");
}

}  // namespace

TEST_CASE("service runs a query through feedback and streams its events") {
    TempDir tmp;
    const RunConfig config = load_config(testing::write_scripted_setup(tmp.path(), 0, 2, "service"));
    Running run(config);
    auto c = run.client();

    auto health = c.Get("/api/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(nlohmann::json::parse(health->body).at("status") == "ok");

    // Metrics are zeroed before any query.
    auto m = c.Get("/api/metrics");
    REQUIRE(m);
    CHECK(m->status == 200);
    const auto zero = nlohmann::json::parse(m->body);
    CHECK(zero.at("queries") == 0);
    CHECK(zero.at("success_rate") == 0.0);
    CHECK(Money::parse(zero.at("total_cost").get<std::string>()) == Money{});

    auto r = post_json(c, "/api/queries", {{"id", "w1"}, {"query", "weather in Oslo"}, {"api_name", "Weather"}});
    REQUIRE(r);
    CHECK(r->status == 202);
    CHECK(nlohmann::json::parse(r->body).at("id") == "w1");

    CHECK(wait_for_status(c, "w1", "awaiting_verdict") == "awaiting_verdict");
    auto first = read_events(c, run.port, "w1", "awaiting_verdict");
    REQUIRE(first.size() >= 4);
    CHECK(first[0].type == "query_start");
    CHECK(first[1].type == "tier_start");
    CHECK(first[1].data.at("tier") == 0);
    for (std::size_t i = 0; i < first.size(); ++i) CHECK(first[i].id == static_cast<std::int64_t>(i));

    // Unknown query and malformed bodies.
    auto unknown = post_json(c, "/api/feedback", {{"query_id", "nope"}, {"success", true}});
    REQUIRE(unknown);
    CHECK(unknown->status == 404);
    auto bad = c.Post("/api/feedback", "{not json", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    auto missing = post_json(c, "/api/feedback", {{"query_id", "w1"}});
    REQUIRE(missing);
    CHECK(missing->status == 400);

    // Failure on rank 0 escalates to rank 1.
    auto fb = post_json(c, "/api/feedback", {{"query_id", "w1"}, {"success", false}});
    REQUIRE(fb);
    CHECK(fb->status == 200);
    auto second = read_events(c, run.port, "w1", "awaiting_verdict", first.back().id);
    REQUIRE_FALSE(second.empty());
    CHECK(second.front().id == first.back().id + 1);
    bool saw_rank1 = false;
    for (const auto& e : second)
        if (e.type == "tier_start" && e.data.at("tier") == 1) saw_rank1 = true;
    CHECK(saw_rank1);

    fb = post_json(c, "/api/feedback", {{"query_id", "w1"}, {"success", true}});
    REQUIRE(fb);
    CHECK(fb->status == 200);
    CHECK(wait_for_status(c, "w1", "done") == "done");
    // Once done, a second verdict has nothing pending.
    auto again = post_json(c, "/api/feedback", {{"query_id", "w1"}, {"success", true}});
    REQUIRE(again);
    CHECK(again->status == 409);

    const auto all = read_events(c, run.port, "w1", "query_done");
    REQUIRE_FALSE(all.empty());
    CHECK(all.back().type == "query_done");
    std::vector<std::string> verdicts;
    for (const auto& e : all)
        if (e.type == "verdict") verdicts.push_back(e.data.dump());
    CHECK(verdicts.size() == 2);

    auto view = nlohmann::json::parse(c.Get("/api/queries/w1")->body);
    CHECK(view.at("result").at("verdict").at("success") == true);
    CHECK(view.at("result").at("tiers_attempted") == nlohmann::json::array({0, 1}));

    m = c.Get("/api/metrics");
    const auto after = nlohmann::json::parse(m->body);
    CHECK(after.at("queries") == 1);
    CHECK(after.at("success_rate") == 100.0);
    CHECK(Money::parse(after.at("total_cost").get<std::string>()) > Money{});

    auto curves = c.Get("/api/curves");
    REQUIRE(curves);
    CHECK(curves->status == 200);
    CHECK(curves->body.rfind("label,queries_processed,cumulative_successes,cumulative_cost\n", 0) == 0);
    CHECK(curves->body.find("hierarchy+demo,1,1,") != std::string::npos);

    // Store redaction hides the code body.
    auto store = nlohmann::json::parse(c.Get("/api/store?redact=1")->body);
    REQUIRE(store.at("records").size() == 1);
    CHECK(store.at("records")[0].dump().find("print('tier 1')") == std::string::npos);
    auto full = nlohmann::json::parse(c.Get("/api/store")->body);
    CHECK(full.at("records")[0].dump().find("print('tier 1')") != std::string::npos);

    // Duplicate ids and bad submissions.
    auto dup = post_json(c, "/api/queries", {{"id", "w1"}, {"query", "again"}, {"api_name", "Weather"}});
    REQUIRE(dup);
    CHECK(dup->status == 409);
    auto empty = post_json(c, "/api/queries", {{"query", ""}, {"api_name", "Weather"}});
    REQUIRE(empty);
    CHECK(empty->status == 400);
    auto nobody = c.Post("/api/queries", "[]", "application/json");
    REQUIRE(nobody);
    CHECK(nobody->status == 400);
    CHECK(c.Get("/api/queries/zzz")->status == 404);
}

TEST_CASE("service queues queries in arrival order") {
    TempDir tmp;
    const RunConfig config = load_config(testing::write_scripted_setup(tmp.path(), 0, 1, "service"));
    Running run(config);
    auto c = run.client();
    for (int i = 0; i < 3; ++i)
        post_json(c, "/api/queries", {{"id", "a" + std::to_string(i)}, {"query", "q"}, {"api_name", "A"}});
    for (int i = 0; i < 3; ++i) {
        const std::string id = "a" + std::to_string(i);
        REQUIRE(wait_for_status(c, id, "awaiting_verdict") == "awaiting_verdict");
        // Later queries are still waiting their turn.
        for (int j = i + 1; j < 3; ++j)
            CHECK(nlohmann::json::parse(c.Get(("/api/queries/a" + std::to_string(j)).c_str())->body).at("status") ==
                  "queued");
        CHECK(post_json(c, "/api/feedback", {{"query_id", id}, {"success", i != 1}})->status == 200);
    }
    REQUIRE(run.service->wait_idle(5s));
    const auto list = nlohmann::json::parse(c.Get("/api/queries")->body).at("queries");
    REQUIRE(list.size() == 3);
    for (const auto& q : list) CHECK(q.at("status") == "done");
    CHECK(nlohmann::json::parse(c.Get("/api/metrics")->body).at("success_rate").get<double>() ==
          doctest::Approx(200.0 / 3.0));
}

TEST_CASE("service curves match the replay export for the same config") {
    TempDir a, b;
    const RunConfig ca = load_config(testing::write_sim_setup(a.path(), 50, 4));
    const RunConfig cb = load_config(testing::write_sim_setup(b.path(), 50, 4));
    const auto replayed = replay(ca, "hierarchy+demo");

    Running run(with_policy(cb, "hierarchy+demo"));
    auto c = run.client();
    for (const auto& q : run.service->runtime().queries) run.service->submit(q);
    REQUIRE(run.service->wait_idle(30s));
    auto curves = c.Get("/api/curves");
    REQUIRE(curves);
    CHECK(curves->body == testing::slurp(replayed.curves));
    const auto m = nlohmann::json::parse(c.Get("/api/metrics")->body);
    CHECK(Money::parse(m.at("total_cost").get<std::string>()) == replayed.summary_data.total_cost);
}

TEST_CASE("stopping closes the feedback channel") {
    TempDir tmp;
    const RunConfig config = load_config(testing::write_scripted_setup(tmp.path(), 0, 1, "service"));
    auto run = std::make_unique<Running>(config);
    auto c = run->client();
    post_json(c, "/api/queries", {{"id", "s1"}, {"query", "q"}, {"api_name", "A"}});
    REQUIRE(wait_for_status(c, "s1", "awaiting_verdict") == "awaiting_verdict");
    run->service->stop();
    // Closed channel, or the worker already marked the query aborted.
    int status = 0;
    try {
        run->service->post_feedback("s1", true, "");
    } catch (const ServiceError& e) {
        status = e.status();
    }
    CHECK((status == 503 || status == 409));
}

TEST_CASE("a busy port is reported") {
    TempDir tmp;
    const RunConfig config = load_config(testing::write_scripted_setup(tmp.path(), 0, 1, "service"));
    Running first(config);
    Service second(build_runtime(config, {.persist = false}));
    CHECK_THROWS_AS(second.start("127.0.0.1", first.port), ServiceError);
}
