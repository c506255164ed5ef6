#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "tierqa/config.hpp"
#include "tierqa/dataset.hpp"
#include "tierqa/ledger.hpp"
#include "tierqa/log.hpp"
#include "tierqa/replay.hpp"
#include "tierqa/serialize.hpp"
#include "tierqa/service.hpp"
#include "tierqa/simulator.hpp"

using namespace tierqa;

namespace {

void apply_logging(const RunConfig& config) {
    set_log_level(spdlog::level::from_str(config.log_level));
    if (config.log_file) set_log_file(*config.log_file);
}

int cmd_serve(const std::string& config_path, const std::string& host, int port, const std::string& label,
              bool preload, bool fresh) {
    RunConfig config = load_config(config_path);
    if (!label.empty()) config = with_policy(config, label);
    if (preload) config.service.preload_dataset = true;
    apply_logging(config);

    // Block termination signals before any thread starts; sigwait below.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    RuntimeOptions options;
    options.fresh = fresh;
    Service service(build_runtime(config, options));
    const int bound = service.start(host.empty() ? config.service.host : host, port >= 0 ? port : config.service.port);
    std::cout << "listening on " << (host.empty() ? config.service.host : host) << ":" << bound << std::endl;
    int sig = 0;
    sigwait(&signals, &sig);
    service.stop();
    return 0;
}

int cmd_replay(const std::string& config_path, const std::vector<std::string>& labels, bool fresh) {
    const RunConfig config = load_config(config_path);
    apply_logging(config);
    std::vector<std::string> todo = labels.empty() ? std::vector<std::string>{config.label} : labels;
    for (const auto& label : todo) {
        RuntimeOptions options;
        options.fresh = fresh;
        const ReplayResult r = replay(config, label, options);
        std::cout << label << ": " << r.summary_data.queries << " queries, success " << r.summary_data.success_rate
                  << "%, cost $" << r.summary_data.total_cost.to_string();
        if (!r.stream.resumed.empty()) std::cout << ", " << r.stream.resumed.size() << " resumed";
        if (r.stream.aborted) std::cout << ", aborted: " << r.stream.abort_reason;
        std::cout << "\n  curves: " << r.curves.string() << "\n  summary: " << r.summary.string() << "\n";
        if (r.stream.aborted) return 3;
    }
    return 0;
}

int cmd_ingest_check(const std::string& dataset, std::uint64_t seed, std::optional<std::uint64_t> shuffle_seed) {
    FakeKeyRegistry keys(seed);
    auto queries = ingest_dataset(dataset, keys);
    if (shuffle_seed) queries = shuffle_queries(std::move(queries), *shuffle_seed);
    std::cout << queries.size() << " queries\n";
    for (const auto& [api, key] : keys.keys()) std::cout << "api " << api << " fake_key " << key << "\n";
    if (shuffle_seed) {
        std::cout << "order:";
        for (const auto& q : queries) std::cout << ' ' << q.id;
        std::cout << "\n";
    }
    return 0;
}

int cmd_summarize(const std::string& ledger, bool exclude_errored, bool csv, const std::string& label) {
    SummaryOptions options;
    options.exclude_errored = exclude_errored;
    const RunSummary s = summarize(load_ledger(ledger), options);
    if (csv) {
        std::vector<int> ranks;
        for (const auto& [r, _] : s.avg_model_calls_per_rank) ranks.push_back(r);
        std::cout << summary_csv_header(ranks) << summary_csv_row(label, s, ranks);
    } else {
        std::cout << to_json(s).dump(2) << "\n";
    }
    return 0;
}

int cmd_export_curves(const std::string& ledger, const std::string& label, const std::string& out) {
    const std::string text = curve_export(label, load_ledger(ledger));
    if (out.empty() || out == "-") {
        std::cout << text;
    } else {
        std::ofstream f(out, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + out);
        f << text;
    }
    return 0;
}

int cmd_simulate(const std::string& profiles_path, std::size_t queries, std::vector<std::uint64_t> seeds,
                 bool tradeoff, const std::string& policy) {
    Calibration cal = default_calibration();
    if (!profiles_path.empty()) cal.tiers = load_profiles(profiles_path);
    cal.queries = queries;
    if (seeds.empty()) seeds = {0};
    int failures = 0;
    for (auto seed : seeds) {
        if (tradeoff) {
            const TradeoffReport report = reproduce_tradeoff(cal, seed);
            std::cout << report.table();
            for (const auto& c : report.checks) {
                std::cout << (c.holds ? "holds  " : "FAILS  ") << c.name << " (" << c.detail << ")\n";
                if (!c.holds) ++failures;
            }
        } else {
            RunConfig dummy;
            dummy.label = policy;
            const PolicyConfig p = resolve_policy(dummy, policy);
            auto tiers = cal.tiers;
            if (p.ranks) {
                std::vector<TierSimProfile> kept;
                for (const auto& t : tiers)
                    if (std::find(p.ranks->begin(), p.ranks->end(), t.rank) != p.ranks->end()) kept.push_back(t);
                tiers = kept;
            }
            const SimOutcome o = simulate(tiers, p.flags, queries, seed, policy);
            const double analytic = expected_cost(
                tiers, p.flags, [&](std::size_t i) { return demo_availability(tiers, p.flags, i); }, queries);
            std::cout << policy << " seed " << seed << ": success " << o.success_rate << "%, cost $"
                      << o.total_cost.to_string() << " (analytic $" << analytic << ")\n";
        }
    }
    return failures == 0 ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tiered LLM question answering with code execution"};
    app.require_subcommand(1);

    std::string config_path, host, label, ledger, out, dataset, profiles, policy = "hierarchy+demo";
    std::vector<std::string> labels;
    int port = -1;
    bool preload = false, fresh = false, exclude_errored = false, csv = false, tradeoff = false;
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> shuffle_seed;
    std::size_t queries = 300;
    std::vector<std::uint64_t> seeds;

    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    serve->add_option("-c,--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    serve->add_option("--host", host, "Bind address (default from config)");
    serve->add_option("-p,--port", port, "Port; 0 picks a free one (default from config)");
    serve->add_option("--label", label, "Policy label");
    serve->add_flag("--preload", preload, "Queue the configured dataset at startup");
    serve->add_flag("--fresh", fresh, "Discard this label's ledger and store first");

    auto* rep = app.add_subcommand("replay", "Run the dataset headlessly and write run artifacts");
    rep->add_option("-c,--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    rep->add_option("-l,--label", labels, "Policy label(s); default: the config label");
    rep->add_flag("--fresh", fresh, "Discard previous artifacts for each label");

    auto* ingest = app.add_subcommand("ingest-check", "Validate a dataset file");
    ingest->add_option("dataset", dataset, "Dataset (JSON lines)")->required()->check(CLI::ExistingFile);
    ingest->add_option("--seed", seed, "Fake-key seed");
    ingest->add_option("--shuffle-seed", shuffle_seed, "Print the order after a seeded shuffle");

    auto* summ = app.add_subcommand("summarize", "Summarize a ledger file");
    summ->add_option("ledger", ledger, "Ledger file")->required()->check(CLI::ExistingFile);
    summ->add_flag("--exclude-errored", exclude_errored, "Drop errored queries from rates");
    summ->add_flag("--csv", csv, "Print a summary table row");
    summ->add_option("--label", label, "Row label")->default_val("run");

    auto* curves = app.add_subcommand("export-curves", "Write the cumulative curve table for a ledger");
    curves->add_option("ledger", ledger, "Ledger file")->required()->check(CLI::ExistingFile);
    curves->add_option("--label", label, "Method label")->default_val("run");
    curves->add_option("-o,--out", out, "Output file (default stdout)");

    auto* sim = app.add_subcommand("simulate", "Simulated tiers: one policy, or the four-policy trade-off table");
    sim->add_option("--profiles", profiles, "Profile file (JSON); default: built-in calibration");
    sim->add_option("-n,--queries", queries, "Queries per run")->default_val(300);
    sim->add_option("--seed", seeds, "Seed(s)");
    sim->add_flag("--tradeoff", tradeoff, "Run the four policies and check the trade-off");
    sim->add_option("--policy", policy, "Policy label for a single run")->default_val("hierarchy+demo");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*serve) return cmd_serve(config_path, host, port, label, preload, fresh);
        if (*rep) return cmd_replay(config_path, labels, fresh);
        if (*ingest) return cmd_ingest_check(dataset, seed, shuffle_seed);
        if (*summ) return cmd_summarize(ledger, exclude_errored, csv, label);
        if (*curves) return cmd_export_curves(ledger, label, out);
        if (*sim) return cmd_simulate(profiles, queries, seeds, tradeoff, policy);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
