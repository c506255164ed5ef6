#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tierqa/types.hpp"

namespace tierqa {

inline constexpr std::string_view kDefaultExecutorReply = "Reply TERMINATE if everything is done.";
inline constexpr std::string_view kTruncationMarker = "[output truncated]";
inline constexpr int kKilledExitStatus = 137;  // 128 + SIGKILL

struct ExecutionResult {
    std::string stdout_text;
    std::string stderr_text;
    int exit_status = 0;
    bool timed_out = false;
    bool stdout_truncated = false;
    bool stderr_truncated = false;
    Duration duration{0};
};

/// The configured interpreter could not be found or started.
class InterpreterError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The real key for an API is not available in the environment.
class MissingCredentialError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Reads from the process environment.
std::optional<std::string> process_env(const std::string& name);

/// Replaces every occurrence of the fake key with `real_key`.
std::string substitute_keys(std::string_view code, std::string_view fake_key, std::string_view real_key);

/// Resolves the real key through `env` and substitutes it. Throws
/// MissingCredentialError (message names the variable, never a key) when the
/// variable is unset or empty, or when it equals the fake key.
std::string substitute_keys(std::string_view code, const ApiSpec& api, const EnvLookup& env = process_env);

struct SandboxConfig {
    std::vector<std::string> interpreter{"python3"};  // argv prefix; script path appended
    std::string script_name = "main.py";
    std::chrono::milliseconds timeout{60'000};
    std::size_t output_cap = 16 * 1024;  // bytes per stream
    std::string path_env = "/usr/local/bin:/usr/bin:/bin";
    std::filesystem::path scratch_root;  // empty = system temp directory
};

/// A private directory for one conversation, removed on destruction.
class ScopedWorkdir {
public:
    explicit ScopedWorkdir(const std::filesystem::path& root = {});
    ~ScopedWorkdir();
    ScopedWorkdir(const ScopedWorkdir&) = delete;
    ScopedWorkdir& operator=(const ScopedWorkdir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// Runs a program (fake-key form) for one conversation turn.
class Executor {
public:
    virtual ~Executor() = default;
    virtual ExecutionResult run(const std::string& code, const ApiSpec& api,
                                const std::filesystem::path& workdir) = 0;
    virtual std::filesystem::path scratch_root() const { return {}; }
    virtual bool needs_workdir() const { return true; }
};

/// Executes code in a fresh interpreter subprocess with an environment
/// allow-list (PATH, HOME=workdir, and the API's real-key variable).
/// Captured streams have the real key rewritten back to the fake key.
class SubprocessExecutor : public Executor {
public:
    explicit SubprocessExecutor(SandboxConfig config = {}, EnvLookup env = process_env);

    ExecutionResult run(const std::string& code, const ApiSpec& api,
                        const std::filesystem::path& workdir) override;
    std::filesystem::path scratch_root() const override { return config_.scratch_root; }

    const SandboxConfig& config() const { return config_; }

private:
    SandboxConfig config_;
    EnvLookup env_;
    std::string interpreter_path_;
};

/// Runs `argv` in `workdir` with exactly `env` ("K=V" entries), a wall-clock
/// timeout, and per-stream capture caps. Never throws on nonzero exit.
/// Throws InterpreterError if argv[0] cannot be executed.
ExecutionResult run_process(const std::vector<std::string>& argv, const std::filesystem::path& workdir,
                            const std::vector<std::string>& env, std::chrono::milliseconds timeout,
                            std::size_t capture_limit);

/// Convenience wrapper used by tests: runs `code` with the interpreter in a
/// throwaway workdir, no key substitution.
ExecutionResult execute(const std::string& code, const std::filesystem::path& workdir,
                        std::chrono::milliseconds timeout, const SandboxConfig& config = {});

/// Cuts `text` to at most `cap` bytes on a UTF-8 boundary; returns true if cut.
bool truncate_utf8(std::string& text, std::size_t cap);

/// Executor message shown to the assistant. With no result (no code block in
/// the assistant message) this is exactly kDefaultExecutorReply.
std::string format_executor_reply(const std::optional<ExecutionResult>& result);

/// Searches PATH for an executable; returns empty string when not found.
std::string find_executable(const std::string& name);

}  // namespace tierqa
