#include "tierqa/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tierqa/orchestrator.hpp"

namespace tierqa {

ModelProfile TierSimProfile::model_profile() const {
    return ModelProfile{name.empty() ? "sim-tier-" + std::to_string(rank) : name, price_in, price_out, context_window,
                        rank};
}

Money TierSimProfile::conversation_cost(int turns) const {
    const std::int64_t n = turns;
    const std::int64_t prompt_tokens = n * tokens_in_per_turn + prompt_growth_per_turn * n * (n - 1) / 2;
    return price_in.cost(prompt_tokens) + price_out.cost(n * tokens_out_per_turn);
}

void validate_profile(const TierSimProfile& p, int max_turns) {
    auto bad = [&](const std::string& why) { throw std::invalid_argument("sim profile rank " + std::to_string(p.rank) + ": " + why); };
    if (p.p_success_base < 0.0 || p.p_success_base > 1.0) bad("p_success_base outside [0,1]");
    if (p.p_success_with_demo < 0.0 || p.p_success_with_demo > 1.0) bad("p_success_with_demo outside [0,1]");
    if (p.turns_on_success < 1 || p.turns_on_success > max_turns) bad("turns_on_success must be in [1, max_turns]");
    if (p.turns_on_failure < 1 || p.turns_on_failure > max_turns) bad("turns_on_failure must be in [1, max_turns]");
    if (p.tokens_in_per_turn <= 0 || p.tokens_out_per_turn <= 0) bad("tokens per turn must be positive");
    if (p.prompt_growth_per_turn < 0) bad("prompt_growth_per_turn must be nonnegative");
}

TierSimProfile profile_from_json(const nlohmann::json& j) {
    TierSimProfile p;
    p.name = j.value("name", std::string{});
    p.rank = j.at("rank").get<int>();
    p.p_success_base = j.at("p_success_base").get<double>();
    p.p_success_with_demo = j.value("p_success_with_demo", p.p_success_base);
    p.turns_on_success = j.value("turns_on_success", p.turns_on_success);
    p.turns_on_failure = j.value("turns_on_failure", p.turns_on_failure);
    p.tokens_in_per_turn = j.value("tokens_in_per_turn", p.tokens_in_per_turn);
    p.tokens_out_per_turn = j.value("tokens_out_per_turn", p.tokens_out_per_turn);
    p.prompt_growth_per_turn = j.value("prompt_growth_per_turn", p.prompt_growth_per_turn);
    p.price_in = TokenPrice::per_million(j.at("price_in").get<std::string>());
    p.price_out = TokenPrice::per_million(j.at("price_out").get<std::string>());
    p.context_window = j.value("context_window", p.context_window);
    return p;
}

nlohmann::ordered_json to_json(const TierSimProfile& p) {
    return nlohmann::ordered_json{{"name", p.name},
                                  {"rank", p.rank},
                                  {"p_success_base", p.p_success_base},
                                  {"p_success_with_demo", p.p_success_with_demo},
                                  {"turns_on_success", p.turns_on_success},
                                  {"turns_on_failure", p.turns_on_failure},
                                  {"tokens_in_per_turn", p.tokens_in_per_turn},
                                  {"tokens_out_per_turn", p.tokens_out_per_turn},
                                  {"prompt_growth_per_turn", p.prompt_growth_per_turn},
                                  {"price_in", p.price_in.to_string()},
                                  {"price_out", p.price_out.to_string()},
                                  {"context_window", p.context_window}};
}

std::vector<TierSimProfile> profiles_from_json(const nlohmann::json& j) {
    const auto& tiers = j.is_array() ? j : j.at("tiers");
    std::vector<TierSimProfile> out;
    for (const auto& t : tiers) out.push_back(profile_from_json(t));
    if (out.empty()) throw std::invalid_argument("sim profile list is empty");
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.rank < b.rank; });
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i].rank == out[i - 1].rank) throw std::invalid_argument("duplicate sim profile rank");
    for (const auto& p : out) validate_profile(p);
    return out;
}

std::vector<TierSimProfile> load_profiles(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open profile file " + path.string());
    try {
        return profiles_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("profile file " + path.string() + ": " + e.what());
    }
}

SimTierBackend::SimTierBackend(TierSimProfile profile, std::uint64_t seed, int max_turns)
    : profile_(std::move(profile)), max_turns_(max_turns), rng_(seed) {
    validate_profile(profile_, max_turns_);
}

BackendReply SimTierBackend::chat(const ModelProfile&, const ChatRequest& request) {
    std::lock_guard lock(mutex_);
    int turn = 0;  // assistant turns already taken
    for (const auto& m : request.messages)
        if (m.role == "assistant") ++turn;

    if (turn == 0) {
        const bool demo = !request.messages.empty() &&
                          request.messages.front().content.find(kDemoHeader) != std::string::npos;
        const double p = demo ? profile_.p_success_with_demo : profile_.p_success_base;
        planned_success_ = std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p;
    }
    const int k = turn + 1;

    BackendReply reply;
    reply.usage = TokenUsage{profile_.tokens_in_per_turn + profile_.prompt_growth_per_turn * turn,
                             profile_.tokens_out_per_turn};
    std::ostringstream text;
    if (planned_success_) {
        if (k < profile_.turns_on_success) {
            text << "Fetching the data.\n```python\nprint('step " << k << " ok')\n```";
        } else if (profile_.turns_on_success == 1) {
            text << "```python\nprint('done')\n```\nThe result is available. " << kSimSolvedMarker << "\nTERMINATE";
        } else {
            text << "The result is available. " << kSimSolvedMarker << "\nTERMINATE";
        }
    } else {
        if (k < profile_.turns_on_failure || profile_.turns_on_failure >= max_turns_) {
            text << "Trying again.\n```python\nprint('attempt " << k << "')\n```";
        } else {
            text << "I could not complete the task.\nTERMINATE";
        }
    }
    reply.text = text.str();
    return reply;
}

std::uint64_t tier_seed(std::uint64_t seed, int rank) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(rank)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

std::shared_ptr<ChatBackend> scripted_backend_from(const TierSimProfile& profile, std::uint64_t seed, int max_turns) {
    return std::make_shared<SimTierBackend>(profile, seed, max_turns);
}

ExecutionResult SimulatedExecutor::run(const std::string&, const ApiSpec&, const std::filesystem::path&) {
    ExecutionResult r;
    r.stdout_text = "ok\n";
    return r;
}

Judgement MarkerVerdictSource::decide(const Query&, const std::vector<Conversation>& conversations) {
    Judgement j;
    j.verdict.source = VerdictSourceKind::human;
    if (!conversations.empty()) {
        const auto& msgs = conversations.back().messages;
        for (auto it = msgs.rbegin(); it != msgs.rend(); ++it) {
            if (it->role == Role::assistant) {
                j.verdict.success = it->content.find(kSimSolvedMarker) != std::string::npos;
                break;
            }
        }
    }
    return j;
}

std::vector<Query> synthetic_queries(std::size_t n) {
    static const char* const kTopics[] = {"weather", "stock price", "exchange rate", "news headline", "movie rating",
                                          "flight status", "air quality", "sports score"};
    std::vector<Query> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Query q;
        q.id = "sim-" + std::to_string(i);
        q.text = std::string("What is the current ") + kTopics[i % 8] + " for item " + std::to_string(i) + "?";
        q.api = ApiSpec{"SimAPI", "0badc0de", ""};
        q.arrival_index = static_cast<std::int64_t>(i);
        out.push_back(std::move(q));
    }
    return out;
}

SimOutcome simulate(const std::vector<TierSimProfile>& profiles, const PolicyFlags& flags, std::size_t n_queries,
                    std::uint64_t seed, const std::string& label, int max_turns) {
    std::vector<Tier> tiers;
    for (const auto& p : profiles) {
        tiers.push_back({p.model_profile(), scripted_backend_from(p, tier_seed(seed, p.rank), max_turns)});
    }
    PipelineOptions options;
    options.flags = flags;
    options.conversation.max_turns = max_turns;
    options.retry.retries = 0;
    auto store = std::make_shared<SolutionStore>(std::make_shared<HashedBowEmbedder>());
    auto ledger = std::make_shared<Ledger>();
    Pipeline pipeline(std::move(tiers), std::make_shared<SimulatedExecutor>(), store,
                      std::make_shared<MarkerVerdictSource>(), ledger, options);

    const StreamResult stream = pipeline.run_stream(synthetic_queries(n_queries));
    const RunSummary summary = summarize(ledger->entries());

    SimOutcome out;
    out.label = label;
    out.seed = seed;
    out.queries = summary.queries;
    out.success_rate = summary.success_rate;
    out.total_cost = summary.total_cost;
    out.avg_model_calls_per_rank = summary.avg_model_calls_per_rank;
    out.curve = stream.curve;
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& r : stream.results) {
        out.per_query_cost.push_back(r.cost);
        const double c = r.cost.to_double();
        sum += c;
        sum_sq += c * c;
    }
    const double n = static_cast<double>(stream.results.size());
    if (n > 0) out.mean_cost = sum / n;
    if (n > 1) {
        const double var = (sum_sq - n * out.mean_cost * out.mean_cost) / (n - 1);
        out.std_error_cost = std::sqrt(std::max(0.0, var) / n);
    }
    return out;
}

namespace {

std::vector<const TierSimProfile*> attempted(const std::vector<TierSimProfile>& profiles, const PolicyFlags& flags) {
    std::vector<const TierSimProfile*> out;
    if (profiles.empty()) throw std::invalid_argument("no sim profiles");
    if (flags.use_hierarchy) {
        for (const auto& p : profiles) out.push_back(&p);
    } else {
        out.push_back(&profiles.back());
    }
    return out;
}

// Cost and success probability of a query with or without a demonstration.
std::pair<double, double> query_moments(const std::vector<const TierSimProfile*>& tiers, bool demo) {
    double reach = 1.0;  // probability every cheaper tier failed
    double cost = 0.0;
    for (const auto* t : tiers) {
        const double p = demo ? t->p_success_with_demo : t->p_success_base;
        const double conv = p * t->conversation_cost(t->turns_on_success).to_double() +
                            (1.0 - p) * t->conversation_cost(t->turns_on_failure).to_double();
        cost += reach * conv;
        reach *= 1.0 - p;
    }
    return {cost, 1.0 - reach};
}

}  // namespace

double expected_query_cost(const std::vector<TierSimProfile>& profiles, const PolicyFlags& flags, double p_demo) {
    const auto tiers = attempted(profiles, flags);
    const double with = query_moments(tiers, true).first;
    const double without = query_moments(tiers, false).first;
    return p_demo * with + (1.0 - p_demo) * without;
}

double expected_success_probability(const std::vector<TierSimProfile>& profiles, const PolicyFlags& flags,
                                    double p_demo) {
    const auto tiers = attempted(profiles, flags);
    return p_demo * query_moments(tiers, true).second + (1.0 - p_demo) * query_moments(tiers, false).second;
}

double demo_availability(const std::vector<TierSimProfile>& profiles, const PolicyFlags& flags, std::size_t index) {
    if (!flags.use_solution_demo) return 0.0;
    // Until something is stored no query sees a demo, so each earlier query
    // stores independently with the no-demo probability. One-turn successes
    // never execute code and store nothing.
    double reach = 1.0, stores = 0.0;
    for (const auto* t : attempted(profiles, flags)) {
        if (t->turns_on_success >= 2) stores += reach * t->p_success_base;
        reach *= 1.0 - t->p_success_base;
    }
    return 1.0 - std::pow(1.0 - stores, static_cast<double>(index));
}

double expected_cost(const std::vector<TierSimProfile>& profiles, const PolicyFlags& flags,
                     const std::function<double(std::size_t)>& p_demo_available, std::size_t n_queries) {
    double total = 0.0;
    for (std::size_t i = 0; i < n_queries; ++i) total += expected_query_cost(profiles, flags, p_demo_available(i));
    return total;
}

Calibration default_calibration() {
    Calibration c;
    TierSimProfile weak;
    weak.name = "weak-tier";
    weak.rank = 0;
    weak.p_success_base = 0.25;
    weak.p_success_with_demo = 0.45;
    weak.turns_on_success = 4;
    weak.turns_on_failure = 2;
    weak.tokens_in_per_turn = 1000;
    weak.tokens_out_per_turn = 300;
    weak.prompt_growth_per_turn = 600;
    weak.price_in = TokenPrice::per_million("1.5");
    weak.price_out = TokenPrice::per_million("3");

    TierSimProfile strong = weak;
    strong.name = "strong-tier";
    strong.rank = 1;
    strong.p_success_base = 0.59;
    strong.p_success_with_demo = 0.78;
    strong.turns_on_success = 2;
    strong.turns_on_failure = 5;
    strong.price_in = TokenPrice::per_million("30");
    strong.price_out = TokenPrice::per_million("60");

    c.tiers = {weak, strong};
    return c;
}

bool TradeoffReport::all_hold() const {
    for (const auto& c : checks)
        if (!c.holds) return false;
    return !checks.empty();
}

std::string TradeoffReport::table() const {
    std::ostringstream out;
    out << "label,seed,queries,success_rate,total_cost";
    std::vector<int> ranks;
    for (const auto& r : rows)
        for (const auto& [rank, _] : r.outcome.avg_model_calls_per_rank)
            if (std::find(ranks.begin(), ranks.end(), rank) == ranks.end()) ranks.push_back(rank);
    std::sort(ranks.begin(), ranks.end());
    for (int r : ranks) out << ",avg_calls_rank" << r;
    out << "\n";
    for (const auto& r : rows) {
        out << r.label << ',' << seed << ',' << r.outcome.queries << ',' << r.outcome.success_rate << ','
            << r.outcome.total_cost.to_string();
        for (int rank : ranks) {
            auto it = r.outcome.avg_model_calls_per_rank.find(rank);
            out << ',' << (it == r.outcome.avg_model_calls_per_rank.end() ? 0.0 : it->second);
        }
        out << "\n";
    }
    return out.str();
}

TradeoffReport reproduce_tradeoff(const Calibration& calibration, std::uint64_t seed) {
    if (calibration.tiers.size() < 2) throw std::invalid_argument("tradeoff needs at least two tiers");
    TradeoffReport report;
    report.seed = seed;
    const std::vector<std::pair<std::string, PolicyFlags>> policies{
        {"strong", {false, false, false}},
        {"strong+demo", {false, true, false}},
        {"hierarchy", {true, false, false}},
        {"hierarchy+demo", {true, true, false}},
    };
    for (const auto& [label, flags] : policies)
        report.rows.push_back({label, flags, simulate(calibration.tiers, flags, calibration.queries, seed, label)});

    const auto& strong = report.rows[0].outcome;
    const auto& hier = report.rows[2].outcome;
    const auto& hier_demo = report.rows[3].outcome;
    const double strong_cost = strong.total_cost.to_double();
    auto ratio = [&](const SimOutcome& o) { return strong_cost > 0 ? o.total_cost.to_double() / strong_cost : 0.0; };

    TradeoffCheck gain;
    gain.name = "hierarchy+demo success >= strong + 10 points";
    gain.value = hier_demo.success_rate - strong.success_rate;
    gain.threshold = 10.0;
    gain.holds = gain.value >= gain.threshold;
    report.checks.push_back(gain);

    TradeoffCheck cheap;
    cheap.name = "hierarchy+demo cost <= 50% of strong";
    cheap.value = ratio(hier_demo);
    cheap.threshold = 0.5;
    cheap.holds = cheap.value <= cheap.threshold;
    report.checks.push_back(cheap);

    TradeoffCheck savings;
    savings.name = "hierarchy cost savings within 10%-50% of strong";
    savings.value = 1.0 - ratio(hier);
    savings.threshold = 0.10;
    savings.holds = savings.value >= 0.10 && savings.value <= 0.50;
    report.checks.push_back(savings);

    for (auto& c : report.checks) {
        std::ostringstream d;
        d << "value=" << c.value << " threshold=" << c.threshold;
        c.detail = d.str();
    }
    return report;
}

}  // namespace tierqa
