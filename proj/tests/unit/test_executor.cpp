#include <doctest.h>

#include <random>

#include "test_support.hpp"
#include "tierqa/executor.hpp"

using namespace tierqa;
using testing::TempDir;

TEST_CASE("key substitution") {
    CHECK(substitute_keys("k='a1b2c3d4'", "a1b2c3d4", "REAL") == "k='REAL'");
    CHECK(substitute_keys("print(1)", "a1b2c3d4", "REAL") == "print(1)");

    ApiSpec api{"Weather", "a1b2c3d4", "WEATHER_KEY"};
    CHECK(substitute_keys("k='a1b2c3d4'", api, testing::fake_env({{"WEATHER_KEY", "s3cr3t-value"}})) ==
          "k='s3cr3t-value'");
    try {
        substitute_keys("k='a1b2c3d4'", api, testing::fake_env({}));
        FAIL("expected MissingCredentialError");
    } catch (const MissingCredentialError& e) {
        const std::string what = e.what();
        CHECK(what.find("missing credential") != std::string::npos);
        CHECK(what.find("WEATHER_KEY") != std::string::npos);
    }
}

TEST_CASE("substitution round-trips over random embeddings of the key") {
    std::mt19937_64 rng(99);
    const std::string fake = "0f1e2d3c";
    const std::string real = "REAL-KEY-7781";
    const std::string alphabet = "abcdefghijklmnopqrstuvwxyz0123456789 =()'\"\n_.";
    for (int i = 0; i < 1000; ++i) {
        std::string code;
        int embedded = 0;
        const int pieces = 1 + static_cast<int>(rng() % 8);
        for (int p = 0; p < pieces; ++p) {
            const int len = static_cast<int>(rng() % 20);
            for (int c = 0; c < len; ++c) code += alphabet[rng() % alphabet.size()];
            if (rng() % 2) {
                code += fake;
                ++embedded;
            }
        }
        const std::string sub = substitute_keys(code, fake, real);
        REQUIRE(count_occurrences(sub, fake) == 0);
        REQUIRE(count_occurrences(sub, real) == static_cast<std::size_t>(embedded));
        REQUIRE(substitute_keys(sub, real, fake) == code);
    }
}

TEST_CASE("execute runs the interpreter in a subprocess") {
    TempDir dir;
    const auto r = execute("print(40+2)\n", dir.path(), std::chrono::seconds(20));
    CHECK(r.stdout_text == "42\n");
    CHECK(r.exit_status == 0);
    CHECK_FALSE(r.timed_out);

    const auto e = execute("raise SystemExit(3)\n", dir.path(), std::chrono::seconds(20));
    CHECK(e.exit_status == 3);
    CHECK_FALSE(e.timed_out);

    const auto err = execute("import sys\nsys.stderr.write('boom')\nsys.exit(1)\n", dir.path(), std::chrono::seconds(20));
    CHECK(err.stderr_text == "boom");
    CHECK(err.exit_status == 1);

    // Deterministic for pure code.
    CHECK(execute("print(sum(range(10)))", dir.path(), std::chrono::seconds(20)).stdout_text ==
          execute("print(sum(range(10)))", dir.path(), std::chrono::seconds(20)).stdout_text);
}

TEST_CASE("timeout kills the process group") {
    TempDir dir;
    const auto r = execute("while True:\n    pass\n", dir.path(), std::chrono::seconds(1));
    CHECK(r.timed_out);
    CHECK(r.exit_status == kKilledExitStatus);
    const double secs = std::chrono::duration<double>(r.duration).count();
    CHECK(secs >= 0.5);
    CHECK(secs <= 1.5);
    CHECK(format_executor_reply(r).find("killed: timed out") != std::string::npos);
}

TEST_CASE("output cap with truncation marker") {
    TempDir dir;
    SandboxConfig cfg;
    cfg.output_cap = 4096;
    const auto r = execute("import sys\nsys.stdout.write('x' * (1024 * 1024))\n", dir.path(), std::chrono::seconds(20), cfg);
    CHECK(r.stdout_truncated);
    CHECK(r.stdout_text.size() <= 4096);
    const auto reply = format_executor_reply(r);
    CHECK(reply.find(kTruncationMarker) != std::string::npos);
    const auto body = reply.substr(reply.find("stdout:\n") + 8);
    CHECK(body.substr(0, body.find('\n')).size() <= 4096);
}

TEST_CASE("utf-8 aware truncation") {
    std::string s = "ab\xc3\xa9";  // "abé"
    CHECK(truncate_utf8(s, 3));
    CHECK(s == "ab");
    std::string t = "abc";
    CHECK_FALSE(truncate_utf8(t, 3));
    CHECK(t == "abc");
}

TEST_CASE("executor reply formats") {
    CHECK(format_executor_reply(std::nullopt) == "Reply TERMINATE if everything is done.");
    ExecutionResult r;
    r.stdout_text = "42\n";
    const auto reply = format_executor_reply(r);
    CHECK(reply.find("exit status: 0") != std::string::npos);
    CHECK(reply.find("42") != std::string::npos);
    CHECK(reply.find("stderr") == std::string::npos);
}

TEST_CASE("sandbox environment and key handling") {
    TempDir scratch;
    const std::string real = "rk-93jd83hd7s";
    SandboxConfig cfg;
    cfg.scratch_root = scratch.path();
    cfg.timeout = std::chrono::seconds(20);
    SubprocessExecutor exec(cfg, testing::fake_env({{"SVC_KEY", real}, {"OTHER_SECRET", "zzz"}}));
    ApiSpec api{"Svc", "deadbeef", "SVC_KEY"};
    ScopedWorkdir wd(scratch.path());

    // The program sees the real key, the transcript sees the fake one.
    const auto r = exec.run("import os\nk = 'deadbeef'\nprint(k)\nprint(os.environ.get('SVC_KEY'))\n"
                            "print(os.environ.get('OTHER_SECRET'))\nprint(os.environ['HOME'])\n",
                            api, wd.path());
    CHECK(r.exit_status == 0);
    CHECK(r.stdout_text.find(real) == std::string::npos);
    CHECK(count_occurrences(r.stdout_text, "deadbeef") == 2);
    CHECK(r.stdout_text.find("None") != std::string::npos);
    CHECK(r.stdout_text.find(wd.path().string()) != std::string::npos);
    // The script is removed after the run.
    CHECK(testing::scan_tree(scratch.path(), real) == 0);

    ApiSpec missing{"Svc", "deadbeef", "UNSET_KEY"};
    const auto m = exec.run("print('deadbeef')", missing, wd.path());
    CHECK(m.exit_status != 0);
    CHECK(m.stderr_text.find("missing credential") != std::string::npos);
    CHECK(m.stderr_text.find(real) == std::string::npos);
}

TEST_CASE("workdirs are private and distinct") {
    TempDir scratch;
    std::filesystem::path a_path;
    {
        ScopedWorkdir a(scratch.path()), b(scratch.path());
        CHECK(a.path() != b.path());
        CHECK(std::filesystem::is_directory(a.path()));
        const auto perms = std::filesystem::status(a.path()).permissions();
        CHECK((perms & std::filesystem::perms::others_all) == std::filesystem::perms::none);
        a_path = a.path();
    }
    CHECK_FALSE(std::filesystem::exists(a_path));
}

TEST_CASE("missing interpreter is a configuration error") {
    SandboxConfig cfg;
    cfg.interpreter = {"definitely-not-an-interpreter-xyz"};
    CHECK_THROWS_AS(SubprocessExecutor{cfg}, InterpreterError);
    CHECK(find_executable("definitely-not-an-interpreter-xyz").empty());
    CHECK_FALSE(find_executable("python3").empty());
}
