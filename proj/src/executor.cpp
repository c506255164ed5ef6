#include "tierqa/executor.hpp"

#include <cerrno>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <fcntl.h>
#include <poll.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include "tierqa/text.hpp"

namespace fs = std::filesystem;

namespace tierqa {

std::optional<std::string> process_env(const std::string& name) {
    const char* v = std::getenv(name.c_str());
    if (v == nullptr) return std::nullopt;
    return std::string(v);
}

std::string substitute_keys(std::string_view code, std::string_view fake_key, std::string_view real_key) {
    return replace_all(code, fake_key, real_key);
}

std::string substitute_keys(std::string_view code, const ApiSpec& api, const EnvLookup& env) {
    if (api.real_key_ref.empty()) return std::string(code);
    const auto real = env(api.real_key_ref);
    if (!real || real->empty())
        throw MissingCredentialError("missing credential: environment variable " + api.real_key_ref + " is not set");
    if (*real == api.fake_key)
        throw MissingCredentialError("missing credential: " + api.real_key_ref + " holds the placeholder key");
    return substitute_keys(code, api.fake_key, *real);
}

std::string find_executable(const std::string& name) {
    if (name.find('/') != std::string::npos) return ::access(name.c_str(), X_OK) == 0 ? name : std::string{};
    const char* path = std::getenv("PATH");
    std::stringstream ss(path ? path : "/usr/local/bin:/usr/bin:/bin");
    std::string dir;
    while (std::getline(ss, dir, ':')) {
        if (dir.empty()) continue;
        const fs::path candidate = fs::path(dir) / name;
        if (::access(candidate.c_str(), X_OK) == 0) return candidate.string();
    }
    return {};
}

ScopedWorkdir::ScopedWorkdir(const fs::path& root) {
    const fs::path base = root.empty() ? fs::temp_directory_path() : root;
    fs::create_directories(base);
    std::random_device rd;
    std::mt19937_64 rng(rd());
    for (int attempt = 0; attempt < 16; ++attempt) {
        std::ostringstream name;
        name << "conv-" << std::hex << rng();
        fs::path candidate = base / name.str();
        std::error_code ec;
        if (fs::create_directory(candidate, ec)) {
            fs::permissions(candidate, fs::perms::owner_all, fs::perm_options::replace, ec);
            path_ = std::move(candidate);
            return;
        }
    }
    throw std::runtime_error("cannot create conversation workdir under " + base.string());
}

ScopedWorkdir::~ScopedWorkdir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

bool truncate_utf8(std::string& text, std::size_t cap) {
    if (text.size() <= cap) return false;
    std::size_t cut = cap;
    // Back off over continuation bytes so a multibyte character is not split.
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
    text.resize(cut);
    return true;
}

namespace {

struct Pipe {
    int fds[2] = {-1, -1};
    Pipe() {
        if (::pipe2(fds, O_CLOEXEC) != 0) throw std::runtime_error(std::string("pipe: ") + std::strerror(errno));
    }
    ~Pipe() {
        close_read();
        close_write();
    }
    void close_read() {
        if (fds[0] >= 0) ::close(fds[0]);
        fds[0] = -1;
    }
    void close_write() {
        if (fds[1] >= 0) ::close(fds[1]);
        fds[1] = -1;
    }
};

}  // namespace

ExecutionResult run_process(const std::vector<std::string>& argv, const fs::path& workdir,
                            const std::vector<std::string>& env, std::chrono::milliseconds timeout,
                            std::size_t capture_limit) {
    if (argv.empty()) throw InterpreterError("empty command");
    Pipe out, err, status;

    std::vector<char*> c_argv;
    for (const auto& a : argv) c_argv.push_back(const_cast<char*>(a.c_str()));
    c_argv.push_back(nullptr);
    std::vector<char*> c_env;
    for (const auto& e : env) c_env.push_back(const_cast<char*>(e.c_str()));
    c_env.push_back(nullptr);

    const auto start = std::chrono::steady_clock::now();
    const pid_t pid = ::fork();
    if (pid < 0) throw std::runtime_error(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(out.fds[1], STDOUT_FILENO);
        ::dup2(err.fds[1], STDERR_FILENO);
        const int devnull = ::open("/dev/null", O_RDONLY);
        if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
        if (::chdir(workdir.c_str()) == 0) ::execve(c_argv[0], c_argv.data(), c_env.data());
        const int code = errno;
        [[maybe_unused]] auto n = ::write(status.fds[1], &code, sizeof code);
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    out.close_write();
    err.close_write();
    status.close_write();

    int exec_errno = 0;
    if (::read(status.fds[0], &exec_errno, sizeof exec_errno) == static_cast<ssize_t>(sizeof exec_errno)) {
        int ignored = 0;
        ::waitpid(pid, &ignored, 0);
        throw InterpreterError("cannot execute " + argv[0] + ": " + std::strerror(exec_errno));
    }

    ExecutionResult result;
    std::string* sinks[2] = {&result.stdout_text, &result.stderr_text};
    bool* truncated[2] = {&result.stdout_truncated, &result.stderr_truncated};
    pollfd fds[2] = {{out.fds[0], POLLIN, 0}, {err.fds[0], POLLIN, 0}};
    int open_streams = 2;
    const auto deadline = start + timeout;
    char buf[8192];

    while (open_streams > 0) {
        const auto now = std::chrono::steady_clock::now();
        if (now >= deadline) {
            result.timed_out = true;
            break;
        }
        const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
        const int rc = ::poll(fds, 2, static_cast<int>(std::max<long long>(1, remaining)));
        if (rc < 0) {
            if (errno == EINTR) continue;
            break;
        }
        for (int i = 0; i < 2; ++i) {
            if (fds[i].fd < 0 || fds[i].revents == 0) continue;
            const ssize_t n = ::read(fds[i].fd, buf, sizeof buf);
            if (n <= 0) {
                fds[i].fd = -1;
                --open_streams;
                continue;
            }
            std::string& sink = *sinks[i];
            const std::size_t room = capture_limit > sink.size() ? capture_limit - sink.size() : 0;
            sink.append(buf, std::min<std::size_t>(room, static_cast<std::size_t>(n)));
            if (static_cast<std::size_t>(n) > room) *truncated[i] = true;
        }
    }

    if (result.timed_out) ::kill(-pid, SIGKILL);
    int wstatus = 0;
    while (::waitpid(pid, &wstatus, 0) < 0 && errno == EINTR) {
    }
    // Reap any stragglers left in the process group.
    ::kill(-pid, SIGKILL);

    result.duration = std::chrono::duration_cast<Duration>(std::chrono::steady_clock::now() - start);
    if (result.timed_out)
        result.exit_status = kKilledExitStatus;
    else if (WIFEXITED(wstatus))
        result.exit_status = WEXITSTATUS(wstatus);
    else if (WIFSIGNALED(wstatus))
        result.exit_status = 128 + WTERMSIG(wstatus);
    return result;
}

SubprocessExecutor::SubprocessExecutor(SandboxConfig config, EnvLookup env)
    : config_(std::move(config)), env_(std::move(env)) {
    if (config_.interpreter.empty()) throw InterpreterError("no interpreter configured");
    interpreter_path_ = find_executable(config_.interpreter.front());
    if (interpreter_path_.empty()) throw InterpreterError("interpreter not found: " + config_.interpreter.front());
}

namespace {

void redact_stream(std::string& text, bool& truncated, std::string_view real, std::string_view fake,
                   std::size_t cap) {
    if (!real.empty()) text = replace_all(text, real, fake);
    if (truncate_utf8(text, cap)) truncated = true;
}

}  // namespace

ExecutionResult SubprocessExecutor::run(const std::string& code, const ApiSpec& api, const fs::path& workdir) {
    std::string program;
    try {
        program = substitute_keys(code, api, env_);
    } catch (const MissingCredentialError& e) {
        ExecutionResult r;
        r.exit_status = 1;
        r.stderr_text = e.what();
        return r;
    }
    std::string real_key;
    if (!api.real_key_ref.empty()) real_key = env_(api.real_key_ref).value_or("");

    const fs::path script = workdir / config_.script_name;
    {
        std::ofstream f(script, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write script in " + workdir.string());
        f << program;
    }
    ::chmod(script.c_str(), S_IRUSR | S_IWUSR);
    // Only the in-sandbox copy ever holds the real key.
    std::fill(program.begin(), program.end(), '\0');

    std::vector<std::string> argv = config_.interpreter;
    argv[0] = interpreter_path_;
    argv.push_back(script.string());
    std::vector<std::string> env{"PATH=" + config_.path_env, "HOME=" + workdir.string(),
                                 "PYTHONDONTWRITEBYTECODE=1", "LANG=C.UTF-8"};
    if (!api.real_key_ref.empty() && !real_key.empty()) env.push_back(api.real_key_ref + "=" + real_key);

    // Capture slack lets a key straddling the cap be redacted before truncation.
    ExecutionResult result = run_process(argv, workdir, env, config_.timeout, config_.output_cap + 4096);
    std::error_code ec;
    fs::remove(script, ec);

    redact_stream(result.stdout_text, result.stdout_truncated, real_key, api.fake_key, config_.output_cap);
    redact_stream(result.stderr_text, result.stderr_truncated, real_key, api.fake_key, config_.output_cap);
    return result;
}

ExecutionResult execute(const std::string& code, const fs::path& workdir, std::chrono::milliseconds timeout,
                        const SandboxConfig& config) {
    SandboxConfig c = config;
    c.timeout = timeout;
    SubprocessExecutor exec(c);
    return exec.run(code, ApiSpec{}, workdir);
}

std::string format_executor_reply(const std::optional<ExecutionResult>& result) {
    if (!result) return std::string(kDefaultExecutorReply);
    const auto& r = *result;
    std::ostringstream out;
    out << "exit status: " << r.exit_status;
    if (r.timed_out) {
        out << " (killed: timed out after "
            << std::chrono::duration_cast<std::chrono::milliseconds>(r.duration).count() << " ms)";
    } else {
        out << (r.exit_status == 0 ? " (execution succeeded)" : " (execution failed)");
    }
    out << "\nstdout:\n" << r.stdout_text;
    if (r.stdout_truncated) out << "\n" << kTruncationMarker;
    if (!r.stderr_text.empty() || r.stderr_truncated) {
        out << "\nstderr:\n" << r.stderr_text;
        if (r.stderr_truncated) out << "\n" << kTruncationMarker;
    }
    return out.str();
}

}  // namespace tierqa
