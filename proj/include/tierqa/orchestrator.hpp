#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tierqa/conversation.hpp"
#include "tierqa/ledger.hpp"
#include "tierqa/prompt.hpp"
#include "tierqa/solution_store.hpp"
#include "tierqa/verdict.hpp"

namespace tierqa {

struct QueryResult {
    std::string query_id;
    Verdict verdict;
    std::vector<Conversation> conversations;  // ascending rank, one per attempted tier
    std::map<int, int> model_calls_per_rank;
    Money cost;        // all tiers attempted plus judge calls
    Money judge_cost;
    Duration wall_time{0};
    std::optional<std::string> demo_used;  // query_id of the demonstration
    std::string initial_prompt;
    bool errored = false;  // every attempted tier hit a backend error
    bool stored = false;

    std::vector<int> tiers_attempted() const;
};

struct PipelineEvents {
    std::function<void(const Query&)> on_query_start;
    std::function<void(const Query&, int rank)> on_tier_start;
    std::function<void(const Query&, const Conversation&, const Message&)> on_message;
    std::function<void(const Query&, int rank)> on_awaiting_verdict;
    std::function<void(const Query&, int rank, const Verdict&)> on_verdict;
    std::function<void(const QueryResult&)> on_query_done;
};

struct PipelineOptions {
    ConversationConfig conversation;
    PolicyFlags flags;
    RetryPolicy retry;
    PromptTemplate prompt;
    EnvLookup env = process_env;  // resolves real keys for store hygiene checks
};

struct StreamResult {
    std::vector<QueryResult> results;
    std::vector<std::string> resumed;  // ids skipped because the ledger already had them
    std::vector<CurvePoint> curve;     // derived from the ledger
    Duration wall_time{0};
    bool aborted = false;
    std::string abort_reason;
};

/// Per-query pipeline: retrieve a demonstration once, run a fresh
/// conversation per tier in ascending rank until a verdict says success,
/// store the solution, and account for every call. One Pipeline processes
/// one stream at a time.
class Pipeline {
public:
    Pipeline(std::vector<Tier> hierarchy, std::shared_ptr<Executor> executor, std::shared_ptr<SolutionStore> store,
             std::shared_ptr<VerdictSource> verdicts, std::shared_ptr<Ledger> ledger, PipelineOptions options);

    QueryResult process_query(const Query& query);

    /// Processes queries strictly in order. Queries that already have a final
    /// verdict in the ledger are skipped. A closed feedback channel stops the
    /// stream with `aborted` set; other per-query errors are isolated.
    StreamResult run_stream(const std::vector<Query>& queries);

    void set_events(PipelineEvents events) { events_ = std::move(events); }

    /// Tiers that will be attempted (only the top tier without hierarchy).
    std::vector<const Tier*> active_tiers() const;
    const std::vector<Tier>& hierarchy() const { return hierarchy_; }
    const PipelineOptions& options() const { return options_; }
    Ledger& ledger() { return *ledger_; }
    SolutionStore* store() { return store_.get(); }

private:
    std::vector<Tier> hierarchy_;
    std::shared_ptr<Executor> executor_;
    std::shared_ptr<SolutionStore> store_;
    std::shared_ptr<VerdictSource> verdicts_;
    std::shared_ptr<Ledger> ledger_;
    PipelineOptions options_;
    PipelineEvents events_;
};

}  // namespace tierqa
