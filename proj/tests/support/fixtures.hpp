#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "test_support.hpp"
#include "tierqa/simulator.hpp"

namespace testing {

/// Dataset of `n` queries on a handful of topics, one API per topic.
inline void write_dataset(const std::filesystem::path& path, int n, const std::string& key_env = "") {
    static const char* topics[][2] = {{"Weather", "weather forecast for city"},
                                      {"Stocks", "closing stock price of company"},
                                      {"News", "latest headlines about topic"},
                                      {"Places", "restaurants near landmark"}};
    std::string text;
    for (int i = 0; i < n; ++i) {
        const auto& t = topics[i % 4];
        nlohmann::json j{{"id", "q" + std::to_string(i)},
                         {"query", std::string(t[1]) + " number " + std::to_string(i)},
                         {"api_name", t[0]}};
        if (!key_env.empty()) j["key_env"] = key_env;
        text += j.dump() + "\n";
    }
    write_file(path, text);
}

/// Two simulated tiers from the default calibration, simulated sandbox, and
/// marker verdicts. Returns the config path.
inline std::filesystem::path write_sim_setup(const std::filesystem::path& dir, int n_queries, std::uint64_t seed,
                                             const std::string& label = "hierarchy+demo") {
    std::filesystem::create_directories(dir);
    write_dataset(dir / "queries.jsonl", n_queries);
    nlohmann::json tiers = nlohmann::json::array();
    for (const auto& p : tierqa::default_calibration().tiers) {
        auto profile = nlohmann::json(tierqa::to_json(p));
        tiers.push_back({{"name", p.name},
                         {"rank", p.rank},
                         {"price_in", p.price_in.to_string()},
                         {"price_out", p.price_out.to_string()},
                         {"context_window", p.context_window},
                         {"backend", {{"type", "sim"}, {"profile", profile}}}});
    }
    const nlohmann::json config{{"label", label},
                                {"seed", seed},
                                {"dataset", "queries.jsonl"},
                                {"hierarchy", tiers},
                                {"verdict", {{"human_source", "marker"}}},
                                {"sandbox", {{"simulated", true}}},
                                {"output_dir", "out"}};
    write_file(dir / "config.json", config.dump(2));
    return dir / "config.json";
}

/// Scripted tiers that write one program and then terminate. `human_source`
/// picks the verdict channel. Returns the config path.
inline std::filesystem::path write_scripted_setup(const std::filesystem::path& dir, int n_queries, int tiers,
                                                  const std::string& human_source,
                                                  const nlohmann::json& extra = nlohmann::json::object()) {
    std::filesystem::create_directories(dir);
    write_dataset(dir / "queries.jsonl", n_queries);
    nlohmann::json hierarchy = nlohmann::json::array();
    for (int r = 0; r < tiers; ++r) {
        const std::string code = "```python\nprint('tier " + std::to_string(r) + "')\n```";
        hierarchy.push_back({{"name", "tier" + std::to_string(r)},
                             {"rank", r},
                             {"price_in", std::to_string(1 + 10 * r)},
                             {"price_out", std::to_string(2 + 20 * r)},
                             {"backend",
                              {{"type", "scripted"},
                               {"script",
                                {{"rules", {{{"match", "exit status"}, {"respond", "Done.\nTERMINATE"}}}},
                                 {"default", code}}}}}});
    }
    nlohmann::json config{{"label", "hierarchy+demo"},
                          {"seed", 1},
                          {"dataset", "queries.jsonl"},
                          {"hierarchy", hierarchy},
                          {"verdict", {{"human_source", human_source}}},
                          {"sandbox", {{"simulated", true}}},
                          {"output_dir", "out"}};
    config.merge_patch(extra);
    write_file(dir / "config.json", config.dump(2));
    return dir / "config.json";
}

}  // namespace testing
