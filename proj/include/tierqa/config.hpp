#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tierqa/backend.hpp"
#include "tierqa/conversation.hpp"
#include "tierqa/executor.hpp"
#include "tierqa/prompt.hpp"
#include "tierqa/simulator.hpp"
#include "tierqa/solution_store.hpp"

namespace tierqa {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// How a tier (or the judge) talks to a model.
struct BackendConfig {
    enum class Kind { scripted, remote, sim };
    Kind kind = Kind::scripted;
    std::filesystem::path script_file;  // scripted
    nlohmann::json script;              // scripted, inline alternative
    RemoteBackendConfig remote;         // remote
    std::optional<TierSimProfile> sim;  // sim
};

struct TierConfig {
    ModelProfile profile;
    BackendConfig backend;
};

enum class VerdictMode { human, autonomous };

/// Where human verdicts come from: the HTTP feedback endpoint, the terminal,
/// a fixed list, or the simulation marker.
enum class HumanSource { service, terminal, scripted, marker };

struct VerdictConfig {
    VerdictMode mode = VerdictMode::human;
    HumanSource human_source = HumanSource::service;
    std::vector<bool> scripted;
    std::optional<TierConfig> judge;  // required in autonomous mode
    std::string judge_system_prompt;  // empty: built-in
};

struct SandboxSettings {
    bool simulated = false;  // use the in-process stand-in executor
    SandboxConfig config;
};

struct StoreSettings {
    std::optional<std::filesystem::path> path;  // default: <output_dir>/<label>/store.jsonl
    double similarity_floor = -1.0;
    enum class EmbedderKind { hashed, remote } embedder = EmbedderKind::hashed;
    std::size_t dimension = 256;
    std::string embed_base_url, embed_model, embed_auth_env;
};

struct ServiceSettings {
    std::string host = "127.0.0.1";
    int port = 8080;
    bool preload_dataset = false;
};

/// A named method: flags plus an optional subset of hierarchy ranks.
struct PolicyConfig {
    PolicyFlags flags;
    std::optional<std::vector<int>> ranks;
};

struct RunConfig {
    std::filesystem::path base_dir;  // relative paths resolve here
    std::string label = "run";
    std::uint64_t seed = 0;
    std::optional<std::filesystem::path> dataset;
    std::optional<std::uint64_t> shuffle_seed;
    std::vector<TierConfig> hierarchy;
    PolicyFlags flags;
    std::map<std::string, PolicyConfig> policies;
    ConversationConfig conversation;
    RetryPolicy retry;
    PromptTemplate prompt;
    VerdictConfig verdict;
    SandboxSettings sandbox;
    StoreSettings store;
    std::optional<std::filesystem::path> ledger_path;  // default: <output_dir>/<label>/ledger.jsonl
    std::filesystem::path output_dir = "out";
    std::optional<std::filesystem::path> log_file;
    std::string log_level = "warn";
    ServiceSettings service;
};

/// Parses a JSON config. Relative paths are resolved against `base_dir`.
/// Throws ConfigError with a field path on invalid input.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

/// Throws ConfigError if the config text carries key material: a literal
/// value under a key-like field name (anything other than an env-var
/// reference), a known key shape, or the value of any referenced env var.
void scan_for_key_material(const std::string& text, const std::vector<std::string>& secret_values);

/// Built-in policy labels: "hierarchy", "hierarchy+demo", "rank:<r>",
/// "rank:<r>+demo", each optionally suffixed "+cot"; config policies first.
PolicyConfig resolve_policy(const RunConfig& config, const std::string& label);

/// Config with the policy for `label` applied (flags and tier subset).
RunConfig with_policy(RunConfig config, const std::string& label);

/// Explicit ledger and store paths may contain "{label}", replaced by the
/// sanitized policy label.
std::filesystem::path run_dir(const RunConfig& config);
std::filesystem::path ledger_path(const RunConfig& config);
std::filesystem::path store_path(const RunConfig& config);

std::shared_ptr<ChatBackend> make_backend(const BackendConfig& cfg, std::uint64_t seed, int max_turns);
std::shared_ptr<const Embedder> make_embedder(const StoreSettings& s);

}  // namespace tierqa
