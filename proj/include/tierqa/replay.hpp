#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "tierqa/config.hpp"
#include "tierqa/dataset.hpp"
#include "tierqa/orchestrator.hpp"

namespace tierqa {

/// Everything one stream needs, assembled from a RunConfig. The service and
/// the replay command both build their pipeline here.
struct Runtime {
    RunConfig config;
    std::shared_ptr<FakeKeyRegistry> keys;
    std::vector<Query> queries;  // the configured dataset, possibly shuffled
    std::shared_ptr<FeedbackChannel> channel;
    std::shared_ptr<SolutionStore> store;
    std::shared_ptr<Ledger> ledger;
    std::unique_ptr<Pipeline> pipeline;
};

struct RuntimeOptions {
    bool fresh = false;       // remove this label's ledger and store first
    bool persist = true;      // false: memory-only ledger and store
    std::istream* in = nullptr;   // terminal verdicts
    std::ostream* out = nullptr;
    EnvLookup env = process_env;
};

std::unique_ptr<Runtime> build_runtime(const RunConfig& config, const RuntimeOptions& options = {});

struct ReplayResult {
    std::filesystem::path dir;
    std::filesystem::path ledger, store, curves, transcripts, summary;
    StreamResult stream;
    RunSummary summary_data;
};

/// Runs the configured dataset under policy `label` and writes
/// <output_dir>/<label>/{ledger.jsonl, store.jsonl, curves.csv,
/// transcripts.jsonl} plus the row for `label` in <output_dir>/summary.csv.
/// Queries already final in the ledger are skipped (resume).
ReplayResult replay(const RunConfig& config, const std::string& label, const RuntimeOptions& options = {});

/// Curve export text for a ledger: header plus one row per processed query.
std::string curve_export(const std::string& label, const std::vector<LedgerEntry>& entries);

/// Replaces (or appends) the row for `label` in a summary table file.
void upsert_summary_row(const std::filesystem::path& path, const std::string& header, const std::string& label,
                        const std::string& row);

}  // namespace tierqa
