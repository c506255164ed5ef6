#pragma once

#include <filesystem>
#include <memory>
#include <utility>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace tierqa {

std::shared_ptr<spdlog::logger> logger();

/// Mirrors all log output into `path` (appending) in addition to stderr.
void set_log_file(const std::filesystem::path& path);

void set_log_level(spdlog::level::level_enum level);

template <typename... Args>
void log_info(fmt::format_string<Args...> fmt, Args&&... args) {
    auto& l = *logger();
    if (l.should_log(spdlog::level::info)) l.info(fmt::format(fmt, std::forward<Args>(args)...));
}

template <typename... Args>
void log_warn(fmt::format_string<Args...> fmt, Args&&... args) {
    auto& l = *logger();
    if (l.should_log(spdlog::level::warn)) l.warn(fmt::format(fmt, std::forward<Args>(args)...));
}

template <typename... Args>
void log_error(fmt::format_string<Args...> fmt, Args&&... args) {
    auto& l = *logger();
    if (l.should_log(spdlog::level::err)) l.error(fmt::format(fmt, std::forward<Args>(args)...));
}

}  // namespace tierqa
