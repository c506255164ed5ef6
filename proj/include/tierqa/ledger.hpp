#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tierqa/money.hpp"
#include "tierqa/types.hpp"

namespace tierqa {

enum class LedgerEvent { model_call, judge_call, execution, verdict };

std::string_view to_string(LedgerEvent e);
LedgerEvent ledger_event_from_string(std::string_view text);

struct LedgerEntry {
    std::int64_t timestamp = 0;  // microseconds since epoch; assigned by the ledger when 0
    std::string query_id;
    int rank = 0;
    LedgerEvent event = LedgerEvent::model_call;
    std::optional<TokenUsage> usage;
    std::optional<Money> cost;  // present iff model_call or judge_call
    Duration duration{0};
    // Verdict entries only.
    std::optional<bool> success;
    bool errored = false;
    bool final = false;  // last verdict for the query
};

std::string serialize(const LedgerEntry& e);
LedgerEntry parse_ledger_line(std::string_view line);

/// Entries of a ledger file, in order. A torn final line is ignored.
std::vector<LedgerEntry> load_ledger(const std::filesystem::path& path);

class LedgerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Append-only accounting log. Each record (or batch) is a single write(2)
/// on an O_APPEND descriptor, so concurrent writers never interleave lines.
/// Without a path the ledger is memory-only.
class Ledger {
public:
    explicit Ledger(std::optional<std::filesystem::path> path = {});
    ~Ledger();
    Ledger(const Ledger&) = delete;
    Ledger& operator=(const Ledger&) = delete;

    /// Validates, timestamps (monotone), and appends. Throws LedgerError on
    /// storage failure and std::invalid_argument on an invalid entry.
    void record(LedgerEntry entry);
    void record_batch(std::vector<LedgerEntry> entries);

    std::vector<LedgerEntry> entries() const;
    std::size_t size() const;
    const std::optional<std::filesystem::path>& path() const { return path_; }

private:
    void validate(const LedgerEntry& e) const;

    std::optional<std::filesystem::path> path_;
    int fd_ = -1;
    mutable std::mutex mutex_;
    std::vector<LedgerEntry> entries_;
    std::int64_t last_timestamp_ = 0;
};

struct CurvePoint {
    std::int64_t queries_processed = 0;
    std::int64_t cumulative_successes = 0;
    Money cumulative_cost;
};

struct QueryOutcome {
    std::string query_id;
    bool success = false;
    bool errored = false;
    Money cost;
};

struct RunSummary {
    std::int64_t queries = 0;
    std::int64_t successes = 0;
    std::int64_t errored = 0;
    double success_rate = 0.0;  // percent
    Money total_cost;
    Money judge_cost;
    std::map<int, double> avg_model_calls_per_rank;
    double total_runtime_s = 0.0;
    std::vector<CurvePoint> curve;
    std::vector<QueryOutcome> outcomes;
};

struct SummaryOptions {
    bool exclude_errored = false;
    std::optional<double> runtime_s;  // overrides the timestamp span
};

/// Derives every run metric from ledger entries alone. A query counts once it
/// has a final verdict entry; queries appear in order of first entry.
RunSummary summarize(const std::vector<LedgerEntry>& entries, const SummaryOptions& options = {});

/// "label,queries_processed,cumulative_successes,cumulative_cost" rows.
std::string curve_csv_header();
std::string curve_csv_rows(const std::string& label, const std::vector<CurvePoint>& curve);

std::string summary_csv_header(const std::vector<int>& ranks);
std::string summary_csv_row(const std::string& label, const RunSummary& s, const std::vector<int>& ranks);

}  // namespace tierqa
