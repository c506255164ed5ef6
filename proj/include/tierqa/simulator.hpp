#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tierqa/backend.hpp"
#include "tierqa/executor.hpp"
#include "tierqa/ledger.hpp"
#include "tierqa/prompt.hpp"
#include "tierqa/verdict.hpp"

namespace tierqa {

/// Marker a simulated assistant puts in its final message on success.
inline constexpr std::string_view kSimSolvedMarker = "[[SIM-SOLVED]]";

/// Synthetic behavior of one hierarchy tier.
struct TierSimProfile {
    std::string name;
    int rank = 0;
    double p_success_base = 0.5;
    double p_success_with_demo = 0.5;
    int turns_on_success = 2;  // 1: code and sentinel share one message and never run, so nothing is stored
    int turns_on_failure = 3;
    std::int64_t tokens_in_per_turn = 1000;
    std::int64_t tokens_out_per_turn = 200;
    // Extra prompt tokens per turn already taken (history resend); 0 keeps
    // per-turn usage constant.
    std::int64_t prompt_growth_per_turn = 0;
    TokenPrice price_in;
    TokenPrice price_out;
    std::int64_t context_window = 1'000'000;

    ModelProfile model_profile() const;
    /// Exact cost of a conversation of `turns` assistant turns.
    Money conversation_cost(int turns) const;
};

/// Throws std::invalid_argument for probabilities outside [0,1], turn counts
/// outside [1, max_turns], or nonpositive tokens.
void validate_profile(const TierSimProfile& p, int max_turns = 5);

/// A backend whose conversations succeed with the profile's probability
/// (demo-conditioned when the first prompt contains the demonstration
/// header). Success: code blocks, then a final message with the marker and
/// the sentinel at turn `turns_on_success`. Failure: code attempts for
/// `turns_on_failure` turns, ending with a bare sentinel unless the turn
/// limit ends it first. Usage is reported exactly.
class SimTierBackend : public ChatBackend {
public:
    SimTierBackend(TierSimProfile profile, std::uint64_t seed, int max_turns = 5);
    BackendReply chat(const ModelProfile& profile, const ChatRequest& request) override;

private:
    TierSimProfile profile_;
    int max_turns_;
    std::mutex mutex_;
    std::mt19937_64 rng_;
    bool planned_success_ = false;
};

/// Profile file: {"tiers": [{"name", "rank", "p_success_base",
/// "p_success_with_demo", "turns_on_success", "turns_on_failure",
/// "tokens_in_per_turn", "tokens_out_per_turn", "prompt_growth_per_turn",
/// "price_in", "price_out", "context_window"}, ...]}. Prices are decimal
/// strings in dollars per million tokens.
TierSimProfile profile_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const TierSimProfile& p);
std::vector<TierSimProfile> profiles_from_json(const nlohmann::json& j);
std::vector<TierSimProfile> load_profiles(const std::filesystem::path& path);

/// Per-tier RNG seed derived from a run seed.
std::uint64_t tier_seed(std::uint64_t seed, int rank);

std::shared_ptr<ChatBackend> scripted_backend_from(const TierSimProfile& profile, std::uint64_t seed,
                                                   int max_turns = 5);

/// Executor stand-in that never spawns a process.
class SimulatedExecutor : public Executor {
public:
    ExecutionResult run(const std::string& code, const ApiSpec& api, const std::filesystem::path& workdir) override;
    bool needs_workdir() const override { return false; }
};

/// Ground-truth verdicts for simulated conversations: success iff the last
/// assistant message of the latest conversation carries kSimSolvedMarker.
class MarkerVerdictSource : public VerdictSource {
public:
    Judgement decide(const Query& query, const std::vector<Conversation>& conversations) override;
    VerdictSourceKind kind() const override { return VerdictSourceKind::human; }
};

struct SimOutcome {
    std::string label;
    std::uint64_t seed = 0;
    std::int64_t queries = 0;
    double success_rate = 0.0;  // percent
    Money total_cost;
    std::map<int, double> avg_model_calls_per_rank;
    std::vector<CurvePoint> curve;
    std::vector<Money> per_query_cost;
    double mean_cost = 0.0;        // dollars per query
    double std_error_cost = 0.0;   // of the mean
};

std::vector<Query> synthetic_queries(std::size_t n);

/// Runs the real pipeline (conversation engine, store, ledger) over
/// `n_queries` synthetic queries with simulated tiers.
SimOutcome simulate(const std::vector<TierSimProfile>& profiles, const PolicyFlags& flags, std::size_t n_queries,
                    std::uint64_t seed, const std::string& label = {}, int max_turns = 5);

/// Expected cost in dollars of one query given the probability that a
/// demonstration is available.
double expected_query_cost(const std::vector<TierSimProfile>& profiles, const PolicyFlags& flags, double p_demo);

/// Probability that query `index` (0-based) sees a demonstration: the store
/// is nonempty once any earlier query stored a solution.
double demo_availability(const std::vector<TierSimProfile>& profiles, const PolicyFlags& flags, std::size_t index);

/// Sum over queries of the expected per-query cost (dollars).
double expected_cost(const std::vector<TierSimProfile>& profiles, const PolicyFlags& flags,
                     const std::function<double(std::size_t)>& p_demo_available, std::size_t n_queries);

double expected_success_probability(const std::vector<TierSimProfile>& profiles, const PolicyFlags& flags,
                                    double p_demo);

struct Calibration {
    std::vector<TierSimProfile> tiers;  // rank order; the last tier is the "strong" one
    std::size_t queries = 300;
};

/// Two-tier default profiles: weak tier
/// 0.25 (0.45 with a demonstration), strong tier 0.59 (0.78).
Calibration default_calibration();

struct TradeoffRow {
    std::string label;
    PolicyFlags flags;
    SimOutcome outcome;
};

struct TradeoffCheck {
    std::string name;
    bool holds = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct TradeoffReport {
    std::uint64_t seed = 0;
    std::vector<TradeoffRow> rows;
    std::vector<TradeoffCheck> checks;
    bool all_hold() const;
    std::string table() const;  // CSV
};

/// Runs strong-only, strong+demo, hierarchy, hierarchy+demo and checks:
/// hierarchy+demo success >= strong-only + 10 points, hierarchy+demo cost
/// <= 50% of strong-only, and hierarchy cost savings within 10-50%.
TradeoffReport reproduce_tradeoff(const Calibration& calibration, std::uint64_t seed);

}  // namespace tierqa
