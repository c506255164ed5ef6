#include "tierqa/replay.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "tierqa/log.hpp"
#include "tierqa/serialize.hpp"

namespace tierqa {

std::unique_ptr<Runtime> build_runtime(const RunConfig& config, const RuntimeOptions& options) {
    auto rt = std::make_unique<Runtime>();
    rt->config = config;
    rt->keys = std::make_shared<FakeKeyRegistry>(config.seed);
    if (config.dataset) {
        rt->queries = ingest_dataset(*config.dataset, *rt->keys);
        if (config.shuffle_seed) rt->queries = shuffle_queries(std::move(rt->queries), *config.shuffle_seed);
    }

    std::optional<std::filesystem::path> lpath, spath;
    if (options.persist) {
        lpath = ledger_path(config);
        spath = store_path(config);
        if (options.fresh) {
            std::filesystem::remove(*lpath);
            std::filesystem::remove(*spath);
        }
        std::filesystem::create_directories(lpath->parent_path());
        std::filesystem::create_directories(spath->parent_path());
    }
    rt->ledger = std::make_shared<Ledger>(lpath);
    rt->store = std::make_shared<SolutionStore>(make_embedder(config.store), spath,
                                                StoreOptions{config.store.similarity_floor});

    std::vector<Tier> tiers;
    for (const auto& t : config.hierarchy)
        tiers.push_back({t.profile, make_backend(t.backend, tier_seed(config.seed, t.profile.rank),
                                                 config.conversation.max_turns)});

    std::shared_ptr<Executor> executor;
    if (config.sandbox.simulated)
        executor = std::make_shared<SimulatedExecutor>();
    else
        executor = std::make_shared<SubprocessExecutor>(config.sandbox.config, options.env);

    std::shared_ptr<VerdictSource> verdicts;
    if (config.verdict.mode == VerdictMode::autonomous) {
        JudgeConfig jc;
        jc.profile = config.verdict.judge->profile;
        if (!config.verdict.judge_system_prompt.empty()) jc.system_prompt = config.verdict.judge_system_prompt;
        jc.retry = config.retry;
        verdicts = std::make_shared<JudgeVerdictSource>(
            make_backend(config.verdict.judge->backend, tier_seed(config.seed, -1), config.conversation.max_turns), jc);
    } else {
        switch (config.verdict.human_source) {
            case HumanSource::service:
                rt->channel = std::make_shared<FeedbackChannel>();
                verdicts = std::make_shared<HumanVerdictSource>(*rt->channel);
                break;
            case HumanSource::terminal:
                verdicts = std::make_shared<TerminalVerdictSource>(options.in ? *options.in : std::cin,
                                                                   options.out ? *options.out : std::cout);
                break;
            case HumanSource::scripted:
                verdicts = std::make_shared<ScriptedVerdictSource>(config.verdict.scripted);
                break;
            case HumanSource::marker:
                verdicts = std::make_shared<MarkerVerdictSource>();
                break;
        }
    }

    PipelineOptions po;
    po.conversation = config.conversation;
    po.flags = config.flags;
    po.retry = config.retry;
    po.prompt = config.prompt;
    po.env = options.env;
    rt->pipeline = std::make_unique<Pipeline>(std::move(tiers), std::move(executor), rt->store, std::move(verdicts),
                                              rt->ledger, po);
    return rt;
}

std::string curve_export(const std::string& label, const std::vector<LedgerEntry>& entries) {
    return curve_csv_header() + curve_csv_rows(label, summarize(entries).curve);
}

void upsert_summary_row(const std::filesystem::path& path, const std::string& header, const std::string& label,
                        const std::string& row) {
    std::vector<std::string> rows;
    if (std::ifstream in(path); in) {
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
            if (first) {
                first = false;
                if (line + "\n" != header) break;  // schema changed: start over
                continue;
            }
            if (line.empty() || line.substr(0, line.find(',')) == label) continue;
            rows.push_back(line + "\n");
        }
    }
    rows.push_back(row);
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << header;
        for (const auto& r : rows) out << r;
    }
    std::filesystem::rename(tmp, path);
}

ReplayResult replay(const RunConfig& base, const std::string& label, const RuntimeOptions& options) {
    std::vector<int> ranks;
    for (const auto& t : base.hierarchy) ranks.push_back(t.profile.rank);
    const RunConfig config = with_policy(base, label);
    if (!config.dataset) throw ConfigError("replay needs a dataset");

    auto rt = build_runtime(config, options);
    ReplayResult out;
    out.dir = run_dir(config);
    std::filesystem::create_directories(out.dir);
    out.ledger = ledger_path(config);
    out.store = store_path(config);
    out.curves = out.dir / "curves.csv";
    out.transcripts = out.dir / "transcripts.jsonl";
    out.summary = config.output_dir / "summary.csv";

    std::ofstream transcripts(out.transcripts, std::ios::binary | (options.fresh ? std::ios::trunc : std::ios::app));
    if (!transcripts) throw std::runtime_error("cannot write " + out.transcripts.string());
    PipelineEvents events;
    events.on_query_done = [&](const QueryResult& r) {
        transcripts << dump(to_json(r)) << '\n';
        transcripts.flush();
    };
    rt->pipeline->set_events(std::move(events));

    log_info("replay '{}': {} queries", label, rt->queries.size());
    out.stream = rt->pipeline->run_stream(rt->queries);
    const auto entries = rt->ledger->entries();
    out.summary_data = summarize(entries);

    {
        std::ofstream curves(out.curves, std::ios::binary | std::ios::trunc);
        curves << curve_export(label, entries);
    }
    upsert_summary_row(out.summary, summary_csv_header(ranks), label, summary_csv_row(label, out.summary_data, ranks));
    return out;
}

}  // namespace tierqa
