#include "tierqa/log.hpp"

#include <mutex>

#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_color_sinks.h>

namespace tierqa {

namespace {

std::mutex g_mutex;

std::shared_ptr<spdlog::logger>& instance() {
    static std::shared_ptr<spdlog::logger> log = [] {
        auto l = std::make_shared<spdlog::logger>("tierqa", std::make_shared<spdlog::sinks::stderr_color_sink_mt>());
        l->set_level(spdlog::level::warn);
        l->flush_on(spdlog::level::info);
        return l;
    }();
    return log;
}

}  // namespace

std::shared_ptr<spdlog::logger> logger() {
    std::lock_guard lock(g_mutex);
    return instance();
}

void set_log_file(const std::filesystem::path& path) {
    std::lock_guard lock(g_mutex);
    auto& log = instance();
    auto file_sink = std::make_shared<spdlog::sinks::basic_file_sink_mt>(path.string(), false);
    std::vector<spdlog::sink_ptr> sinks{log->sinks().front(), file_sink};
    auto replacement = std::make_shared<spdlog::logger>("tierqa", sinks.begin(), sinks.end());
    replacement->set_level(log->level());
    replacement->flush_on(spdlog::level::info);
    log = std::move(replacement);
}

void set_log_level(spdlog::level::level_enum level) {
    std::lock_guard lock(g_mutex);
    instance()->set_level(level);
}

}  // namespace tierqa
