#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>

#include "tierqa/backend.hpp"
#include "tierqa/config.hpp"
#include "tierqa/ledger.hpp"
#include "tierqa/prompt.hpp"
#include "tierqa/replay.hpp"
#include "tierqa/serialize.hpp"
#include "tierqa/simulator.hpp"
#include "tierqa/solution_store.hpp"
#include "tierqa/text.hpp"
#include "tierqa/verdict.hpp"

namespace py = pybind11;
using namespace tierqa;

namespace {

// JSON crosses the boundary as text; the json module does the conversion.
template <typename J>
py::object to_py(const J& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_py(const py::handle& obj) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

std::vector<TierSimProfile> profiles_arg(const py::object& profiles) {
    if (profiles.is_none()) return default_calibration().tiers;
    return profiles_from_json(nlohmann::json{{"tiers", from_py(profiles)}});
}

// Flags and tier subset for a policy label such as "hierarchy+demo" or "rank:1".
std::pair<PolicyFlags, std::vector<TierSimProfile>> policy_arg(const std::string& label,
                                                               std::vector<TierSimProfile> tiers) {
    RunConfig dummy;
    const PolicyConfig p = resolve_policy(dummy, label);
    if (p.ranks) {
        std::erase_if(tiers, [&](const TierSimProfile& t) {
            return std::find(p.ranks->begin(), p.ranks->end(), t.rank) == p.ranks->end();
        });
        if (tiers.empty()) throw std::invalid_argument("policy '" + label + "' selects no tier");
    }
    return {p.flags, std::move(tiers)};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Tiered question answering: text helpers, costs, retrieval, simulation and replay";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def("extract_code_blocks", [](const std::string& s) { return extract_code_blocks(s); }, py::arg("message"));
    m.def(
        "is_terminate", [](const std::string& s, const std::string& sentinel) { return is_terminate(s, sentinel); },
        py::arg("message"), py::arg("sentinel") = std::string(kSentinel));
    m.def("estimate_tokens", [](const std::string& s) { return estimate_tokens(s); }, py::arg("text"));
    m.def("generate_fake_key", &generate_fake_key, py::arg("seed"));
    m.def(
        "cost",
        [](const std::string& price_in, const std::string& price_out, std::int64_t tokens_in, std::int64_t tokens_out) {
            return (TokenPrice::per_million(price_in).cost(tokens_in) +
                    TokenPrice::per_million(price_out).cost(tokens_out))
                .to_string();
        },
        "Exact dollar cost as a decimal string; prices are dollars per million tokens.", py::arg("price_in"),
        py::arg("price_out"), py::arg("tokens_in"), py::arg("tokens_out"));

    m.def(
        "embed", [](const std::string& text, std::size_t dim) { return HashedBowEmbedder(dim).embed(text).values; },
        py::arg("text"), py::arg("dimension") = 256);
    m.def(
        "cosine",
        [](std::vector<double> a, std::vector<double> b) {
            return cosine(EmbeddingVector{std::move(a)}, EmbeddingVector{std::move(b)});
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "build_initial_prompt",
        [](const std::string& query, const std::string& api_name, const std::string& fake_key,
           std::optional<std::string> demo_query, std::optional<std::string> demo_code, bool cot) {
            Query q{"q", query, ApiSpec{api_name, fake_key, ""}, 0};
            PolicyFlags flags;
            flags.use_cot = cot;
            flags.use_solution_demo = demo_query.has_value();
            SolutionRecord demo;
            if (demo_query) {
                demo.query_id = "demo";
                demo.query_text = *demo_query;
                demo.code = demo_code.value_or("");
            }
            return build_initial_prompt(q, demo_query ? &demo : nullptr, flags);
        },
        py::arg("query"), py::arg("api_name"), py::arg("fake_key"), py::arg("demo_query") = py::none(),
        py::arg("demo_code") = py::none(), py::arg("cot") = false);

    m.def("parse_judge_reply", [](const std::string& s) { return parse_judge_reply(s); }, py::arg("reply"));
    m.def(
        "judge_quality",
        [](const std::vector<bool>& judge, const std::vector<bool>& truth) {
            const auto q = judge_quality(judge, truth);
            py::dict d;
            d["accuracy"] = q.accuracy;
            d["precision"] = q.precision;
            d["recall"] = q.recall;
            d["tp"] = q.counts.tp;
            d["fp"] = q.counts.fp;
            d["tn"] = q.counts.tn;
            d["fn"] = q.counts.fn;
            return d;
        },
        py::arg("judge"), py::arg("truth"));

    m.def("default_calibration", [] {
        py::list out;
        for (const auto& t : default_calibration().tiers) out.append(to_py(to_json(t)));
        return out;
    });
    m.def(
        "expected_cost",
        [](const std::string& policy, std::size_t n, const py::object& profiles) {
            auto [flags, tiers] = policy_arg(policy, profiles_arg(profiles));
            return expected_cost(tiers, flags, [&](std::size_t i) { return demo_availability(tiers, flags, i); }, n);
        },
        "Expected total dollars over n queries.", py::arg("policy"), py::arg("queries"),
        py::arg("profiles") = py::none());
    m.def(
        "simulate",
        [](const std::string& policy, std::size_t n, std::uint64_t seed, const py::object& profiles) {
            auto [flags, tiers] = policy_arg(policy, profiles_arg(profiles));
            SimOutcome o;
            {
                py::gil_scoped_release release;
                o = simulate(tiers, flags, n, seed, policy);
            }
            py::dict d;
            d["label"] = o.label;
            d["seed"] = o.seed;
            d["queries"] = o.queries;
            d["success_rate"] = o.success_rate;
            d["total_cost"] = o.total_cost.to_string();
            d["mean_cost"] = o.mean_cost;
            d["std_error_cost"] = o.std_error_cost;
            d["avg_model_calls_per_rank"] = o.avg_model_calls_per_rank;
            return d;
        },
        py::arg("policy"), py::arg("queries"), py::arg("seed") = 0, py::arg("profiles") = py::none());
    m.def(
        "reproduce_tradeoff",
        [](std::uint64_t seed, std::size_t n, const py::object& profiles) {
            Calibration cal = default_calibration();
            cal.tiers = profiles_arg(profiles);
            cal.queries = n;
            TradeoffReport r;
            {
                py::gil_scoped_release release;
                r = reproduce_tradeoff(cal, seed);
            }
            py::dict d;
            d["seed"] = r.seed;
            d["all_hold"] = r.all_hold();
            d["table"] = r.table();
            py::list checks;
            for (const auto& c : r.checks) {
                py::dict cd;
                cd["name"] = c.name;
                cd["holds"] = c.holds;
                cd["value"] = c.value;
                cd["threshold"] = c.threshold;
                checks.append(cd);
            }
            d["checks"] = checks;
            return d;
        },
        py::arg("seed") = 0, py::arg("queries") = 300, py::arg("profiles") = py::none());

    m.def(
        "replay",
        [](const std::filesystem::path& config_path, std::optional<std::string> label, bool fresh) {
            const RunConfig config = load_config(config_path);
            RuntimeOptions options;
            options.fresh = fresh;
            ReplayResult r;
            {
                py::gil_scoped_release release;
                r = replay(config, label.value_or(config.label), options);
            }
            py::dict d;
            d["summary"] = to_py(to_json(r.summary_data));
            d["curves"] = r.curves;
            d["ledger"] = r.ledger;
            d["transcripts"] = r.transcripts;
            d["summary_csv"] = r.summary;
            d["resumed"] = r.stream.resumed.size();
            return d;
        },
        "Run a config's dataset headlessly; returns the summary and artifact paths.", py::arg("config"),
        py::arg("label") = py::none(), py::arg("fresh") = false);
    m.def(
        "summarize_ledger",
        [](const std::filesystem::path& path, bool exclude_errored) {
            SummaryOptions o;
            o.exclude_errored = exclude_errored;
            return to_py(to_json(summarize(load_ledger(path), o)));
        },
        py::arg("path"), py::arg("exclude_errored") = false);
}
