#include "tierqa/ledger.hpp"

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include <fcntl.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

namespace tierqa {

std::string_view to_string(LedgerEvent e) {
    switch (e) {
    case LedgerEvent::model_call: return "model_call";
    case LedgerEvent::judge_call: return "judge_call";
    case LedgerEvent::execution: return "execution";
    case LedgerEvent::verdict: return "verdict";
    }
    return "model_call";
}

LedgerEvent ledger_event_from_string(std::string_view text) {
    if (text == "model_call") return LedgerEvent::model_call;
    if (text == "judge_call") return LedgerEvent::judge_call;
    if (text == "execution") return LedgerEvent::execution;
    if (text == "verdict") return LedgerEvent::verdict;
    throw std::invalid_argument("unknown ledger event: " + std::string(text));
}

std::string serialize(const LedgerEntry& e) {
    nlohmann::ordered_json j;
    j["ts"] = e.timestamp;
    j["query_id"] = e.query_id;
    j["rank"] = e.rank;
    j["event"] = to_string(e.event);
    if (e.usage) j["usage"] = {{"prompt_tokens", e.usage->prompt_tokens}, {"completion_tokens", e.usage->completion_tokens}};
    if (e.cost) j["cost"] = e.cost->to_string();
    j["duration_ns"] = e.duration.count();
    if (e.success) j["success"] = *e.success;
    if (e.errored) j["errored"] = true;
    if (e.final) j["final"] = true;
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

LedgerEntry parse_ledger_line(std::string_view line) {
    const auto j = nlohmann::json::parse(line);
    LedgerEntry e;
    e.timestamp = j.at("ts").get<std::int64_t>();
    e.query_id = j.at("query_id").get<std::string>();
    e.rank = j.at("rank").get<int>();
    e.event = ledger_event_from_string(j.at("event").get<std::string>());
    if (j.contains("usage"))
        e.usage = TokenUsage{j["usage"].at("prompt_tokens").get<std::int64_t>(),
                             j["usage"].at("completion_tokens").get<std::int64_t>()};
    if (j.contains("cost")) e.cost = Money::parse(j.at("cost").get<std::string>());
    e.duration = Duration(j.value("duration_ns", std::int64_t{0}));
    if (j.contains("success")) e.success = j.at("success").get<bool>();
    e.errored = j.value("errored", false);
    e.final = j.value("final", false);
    return e;
}

std::vector<LedgerEntry> load_ledger(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LedgerError("cannot open ledger " + path.string());
    std::vector<LedgerEntry> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(parse_ledger_line(line));
        } catch (const std::exception& e) {
            if (in.peek() == std::char_traits<char>::eof()) break;
            throw LedgerError("ledger " + path.string() + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

Ledger::Ledger(std::optional<std::filesystem::path> path) : path_(std::move(path)) {
    if (!path_) return;
    if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
    fd_ = ::open(path_->c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0600);
    if (fd_ < 0) throw LedgerError("cannot open ledger " + path_->string() + ": " + std::strerror(errno));
    if (std::filesystem::file_size(*path_) > 0) {
        entries_ = load_ledger(*path_);
        for (const auto& e : entries_) last_timestamp_ = std::max(last_timestamp_, e.timestamp);
    }
}

Ledger::~Ledger() {
    if (fd_ >= 0) ::close(fd_);
}

void Ledger::validate(const LedgerEntry& e) const {
    const bool billed = e.event == LedgerEvent::model_call || e.event == LedgerEvent::judge_call;
    if (billed != e.cost.has_value())
        throw std::invalid_argument("ledger: cost must be present exactly for model and judge calls");
    if (e.event == LedgerEvent::verdict && !e.success)
        throw std::invalid_argument("ledger: verdict entry without outcome");
    if (e.query_id.empty()) throw std::invalid_argument("ledger: entry without query_id");
}

void Ledger::record(LedgerEntry entry) {
    std::vector<LedgerEntry> batch;
    batch.push_back(std::move(entry));
    record_batch(std::move(batch));
}

void Ledger::record_batch(std::vector<LedgerEntry> batch) {
    for (const auto& e : batch) validate(e);
    std::lock_guard lock(mutex_);
    const std::int64_t now = std::chrono::duration_cast<std::chrono::microseconds>(
                                 std::chrono::system_clock::now().time_since_epoch())
                                 .count();
    std::string buffer;
    for (auto& e : batch) {
        if (e.timestamp == 0) e.timestamp = now;
        e.timestamp = std::max(e.timestamp, last_timestamp_);
        last_timestamp_ = e.timestamp;
        buffer += serialize(e);
        buffer += '\n';
    }
    if (fd_ >= 0) {
        std::size_t written = 0;
        while (written < buffer.size()) {
            const ssize_t n = ::write(fd_, buffer.data() + written, buffer.size() - written);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw LedgerError("ledger write failed: " + std::string(std::strerror(errno)));
            }
            written += static_cast<std::size_t>(n);
        }
    }
    for (auto& e : batch) entries_.push_back(std::move(e));
}

std::vector<LedgerEntry> Ledger::entries() const {
    std::lock_guard lock(mutex_);
    return entries_;
}

std::size_t Ledger::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

RunSummary summarize(const std::vector<LedgerEntry>& entries, const SummaryOptions& options) {
    RunSummary s;
    std::vector<QueryOutcome> order;
    std::unordered_map<std::string, std::size_t> index;
    std::unordered_map<std::string, bool> finished;
    std::map<int, std::int64_t> calls;

    for (const auto& e : entries) {
        auto [it, inserted] = index.try_emplace(e.query_id, order.size());
        if (inserted) order.push_back({e.query_id, false, false, Money{}});
        QueryOutcome& q = order[it->second];
        if (e.cost) {
            q.cost += *e.cost;
            if (e.event == LedgerEvent::judge_call) s.judge_cost += *e.cost;
        }
        if (e.event == LedgerEvent::model_call) ++calls[e.rank];
        if (e.event == LedgerEvent::verdict) {
            q.success = e.success.value_or(false);
            q.errored = e.errored;
            if (e.final) finished[e.query_id] = true;
        }
    }

    std::int64_t counted = 0;
    for (auto& q : order) {
        s.total_cost += q.cost;
        if (!finished.count(q.query_id)) continue;
        ++s.queries;
        if (q.errored) ++s.errored;
        if (q.success) ++s.successes;
        if (!(options.exclude_errored && q.errored)) ++counted;
        CurvePoint p;
        p.queries_processed = s.queries;
        p.cumulative_successes = s.successes;
        p.cumulative_cost = s.curve.empty() ? q.cost : s.curve.back().cumulative_cost + q.cost;
        s.curve.push_back(p);
        s.outcomes.push_back(q);
    }
    // Spend of unfinished queries is still spend; fold it into the last point.
    if (!s.curve.empty()) s.curve.back().cumulative_cost = s.total_cost;

    s.success_rate = counted > 0 ? 100.0 * static_cast<double>(s.successes) / static_cast<double>(counted) : 0.0;
    if (s.queries > 0)
        for (const auto& [rank, n] : calls)
            s.avg_model_calls_per_rank[rank] = static_cast<double>(n) / static_cast<double>(s.queries);

    if (options.runtime_s) {
        s.total_runtime_s = *options.runtime_s;
    } else if (!entries.empty()) {
        s.total_runtime_s = static_cast<double>(entries.back().timestamp - entries.front().timestamp) / 1e6;
    }
    return s;
}

std::string curve_csv_header() { return "label,queries_processed,cumulative_successes,cumulative_cost\n"; }

std::string curve_csv_rows(const std::string& label, const std::vector<CurvePoint>& curve) {
    std::string out;
    for (const auto& p : curve) {
        out += label + "," + std::to_string(p.queries_processed) + "," + std::to_string(p.cumulative_successes) + "," +
               p.cumulative_cost.to_string() + "\n";
    }
    return out;
}

std::string summary_csv_header(const std::vector<int>& ranks) {
    std::string h = "label,queries,success_rate,total_cost,judge_cost";
    for (int r : ranks) h += ",avg_calls_rank" + std::to_string(r);
    h += ",runtime_s\n";
    return h;
}

std::string summary_csv_row(const std::string& label, const RunSummary& s, const std::vector<int>& ranks) {
    std::ostringstream out;
    out << label << ',' << s.queries << ',' << std::fixed << std::setprecision(2) << s.success_rate << ','
        << s.total_cost.to_string() << ',' << s.judge_cost.to_string();
    for (int r : ranks) {
        auto it = s.avg_model_calls_per_rank.find(r);
        out << ',' << (it == s.avg_model_calls_per_rank.end() ? 0.0 : it->second);
    }
    out << ',' << std::setprecision(3) << s.total_runtime_s << '\n';
    return out.str();
}

}  // namespace tierqa
