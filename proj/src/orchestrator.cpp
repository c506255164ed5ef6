#include "tierqa/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <set>

#include "tierqa/log.hpp"

namespace tierqa {

std::vector<int> QueryResult::tiers_attempted() const {
    std::vector<int> ranks;
    for (const auto& c : conversations) ranks.push_back(c.tier_index);
    return ranks;
}

Pipeline::Pipeline(std::vector<Tier> hierarchy, std::shared_ptr<Executor> executor,
                   std::shared_ptr<SolutionStore> store, std::shared_ptr<VerdictSource> verdicts,
                   std::shared_ptr<Ledger> ledger, PipelineOptions options)
    : hierarchy_(std::move(hierarchy)),
      executor_(std::move(executor)),
      store_(std::move(store)),
      verdicts_(std::move(verdicts)),
      ledger_(ledger ? std::move(ledger) : std::make_shared<Ledger>()),
      options_(std::move(options)) {
    std::vector<ModelProfile> profiles;
    for (const auto& t : hierarchy_) {
        if (!t.backend) throw std::invalid_argument("tier '" + t.profile.name + "' has no backend");
        profiles.push_back(t.profile);
    }
    validate_hierarchy(profiles);
    std::sort(hierarchy_.begin(), hierarchy_.end(),
              [](const Tier& a, const Tier& b) { return a.profile.rank < b.profile.rank; });
    if (!executor_) throw std::invalid_argument("pipeline needs an executor");
    if (!verdicts_) throw std::invalid_argument("pipeline needs a verdict source");
    if (options_.flags.use_solution_demo && !store_)
        throw std::invalid_argument("solution demonstration requires a solution store");
}

std::vector<const Tier*> Pipeline::active_tiers() const {
    std::vector<const Tier*> out;
    if (options_.flags.use_hierarchy) {
        for (const auto& t : hierarchy_) out.push_back(&t);
    } else {
        out.push_back(&hierarchy_.back());
    }
    return out;
}

QueryResult Pipeline::process_query(const Query& query) {
    const auto start = std::chrono::steady_clock::now();
    const PolicyFlags& flags = options_.flags;
    if (events_.on_query_start) events_.on_query_start(query);

    QueryResult result;
    result.query_id = query.id;
    std::vector<LedgerEntry> pending;

    std::optional<Retrieval> demo;
    if (flags.use_solution_demo && store_) demo = store_->retrieve_top1(query.text);
    if (demo) result.demo_used = demo->record.query_id;
    result.initial_prompt = build_initial_prompt(query, demo ? &demo->record : nullptr, flags, options_.prompt);

    int errored_tiers = 0;
    bool decided = false;
    try {
        for (const Tier* tier : active_tiers()) {
            const int rank = tier->profile.rank;
            if (events_.on_tier_start) events_.on_tier_start(query, rank);

            ConversationHooks hooks;
            hooks.on_model_call = [&](const Conversation&, const ChatExchange& ex, Money cost) {
                LedgerEntry e;
                e.query_id = query.id;
                e.rank = rank;
                e.event = LedgerEvent::model_call;
                e.usage = ex.usage;
                e.cost = cost;
                e.duration = ex.wall_time;
                pending.push_back(std::move(e));
            };
            hooks.on_execution = [&](const Conversation&, const ExecutionResult& r) {
                LedgerEntry e;
                e.query_id = query.id;
                e.rank = rank;
                e.event = LedgerEvent::execution;
                e.duration = r.duration;
                pending.push_back(std::move(e));
            };
            if (events_.on_message)
                hooks.on_message = [&](const Conversation& c, const Message& m) { events_.on_message(query, c, m); };

            Conversation conv = run_conversation(*tier, *executor_, query, result.initial_prompt,
                                                 options_.conversation, hooks, options_.retry);
            result.model_calls_per_rank[rank] += conv.assistant_turns();
            result.cost += conv.cost();
            if (conv.errored) ++errored_tiers;
            result.conversations.push_back(std::move(conv));
            const Conversation& last = result.conversations.back();

            Verdict verdict;
            verdict.source = verdicts_->kind();
            if (classify_success_candidate(last)) {
                if (events_.on_awaiting_verdict) events_.on_awaiting_verdict(query, rank);
                Judgement j = verdicts_->decide(query, result.conversations);
                for (const auto& call : j.calls) {
                    LedgerEntry e;
                    e.query_id = query.id;
                    e.rank = rank;
                    e.event = LedgerEvent::judge_call;
                    e.usage = call.usage;
                    e.cost = call.cost;
                    e.duration = call.duration;
                    pending.push_back(std::move(e));
                    result.cost += call.cost;
                    result.judge_cost += call.cost;
                }
                verdict = j.verdict;
            } else {
                verdict.success = false;
                verdict.note = "no code executed and no sentinel";
            }
            if (events_.on_verdict) events_.on_verdict(query, rank, verdict);

            LedgerEntry v;
            v.query_id = query.id;
            v.rank = rank;
            v.event = LedgerEvent::verdict;
            v.success = verdict.success;
            v.errored = last.errored || verdict.errored;
            v.duration = verdict.latency;
            pending.push_back(std::move(v));
            result.verdict = verdict;

            if (verdict.success) {
                decided = true;
                if (flags.use_solution_demo && store_ && last.final_code && !last.final_code->empty()) {
                    if (!query.api.real_key_ref.empty())
                        if (auto real = options_.env(query.api.real_key_ref)) store_->add_secret(*real);
                    store_->insert({query.id, query.text, *last.final_code, {}, rank, 0});
                    result.stored = true;
                }
                break;
            }
        }
    } catch (const ChannelClosed&) {
        throw;
    } catch (const InterpreterError&) {
        throw;
    } catch (const LedgerError&) {
        throw;
    } catch (const std::exception& e) {
        log_error("query {}: {}", query.id, e.what());
        result.verdict.success = false;
        result.verdict.errored = true;
        result.verdict.note = e.what();
        result.errored = true;
    }

    if (!decided && !result.conversations.empty() &&
        errored_tiers == static_cast<int>(result.conversations.size()))
        result.errored = true;

    // Exactly one final verdict per query.
    auto last_verdict = std::find_if(pending.rbegin(), pending.rend(),
                                     [](const LedgerEntry& e) { return e.event == LedgerEvent::verdict; });
    if (last_verdict == pending.rend()) {
        LedgerEntry v;
        v.query_id = query.id;
        v.rank = result.conversations.empty() ? 0 : result.conversations.back().tier_index;
        v.event = LedgerEvent::verdict;
        v.success = false;
        pending.push_back(std::move(v));
        last_verdict = pending.rbegin();
    }
    last_verdict->final = true;
    last_verdict->errored = result.errored;
    if (result.errored) {
        last_verdict->success = false;
        result.verdict.success = false;
    }

    ledger_->record_batch(std::move(pending));
    result.wall_time = std::chrono::duration_cast<Duration>(std::chrono::steady_clock::now() - start);
    if (events_.on_query_done) events_.on_query_done(result);
    return result;
}

StreamResult Pipeline::run_stream(const std::vector<Query>& queries) {
    const auto start = std::chrono::steady_clock::now();
    StreamResult out;

    std::set<std::string> done;
    for (const auto& e : ledger_->entries())
        if (e.event == LedgerEvent::verdict && e.final) done.insert(e.query_id);

    std::int64_t last_index = -1;
    for (const auto& q : queries) {
        if (q.arrival_index <= last_index)
            throw std::invalid_argument("queries must be ordered by strictly increasing arrival_index");
        last_index = q.arrival_index;
        if (done.count(q.id)) {
            out.resumed.push_back(q.id);
            continue;
        }
        try {
            out.results.push_back(process_query(q));
        } catch (const ChannelClosed& e) {
            out.aborted = true;
            out.abort_reason = e.what();
            log_warn("stream aborted at query {}: {}", q.id, e.what());
            break;
        }
    }
    out.wall_time = std::chrono::duration_cast<Duration>(std::chrono::steady_clock::now() - start);
    out.curve = summarize(ledger_->entries()).curve;
    return out;
}

}  // namespace tierqa
