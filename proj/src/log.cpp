#include "flexpipe/log.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <mutex>

namespace flexpipe {

namespace {
std::atomic<LogLevel> g_level{LogLevel::warn};
std::mutex g_io_mutex;

const char* level_name(LogLevel l) {
    switch (l) {
        case LogLevel::error: return "error";
        case LogLevel::warn: return "warn";
        case LogLevel::info: return "info";
        case LogLevel::debug: return "debug";
        default: return "off";
    }
}
} // namespace

void set_log_level(LogLevel level) { g_level.store(level, std::memory_order_relaxed); }

LogLevel log_level() { return g_level.load(std::memory_order_relaxed); }

bool set_log_level(const std::string& name) {
    if (name == "off") set_log_level(LogLevel::off);
    else if (name == "error") set_log_level(LogLevel::error);
    else if (name == "warn") set_log_level(LogLevel::warn);
    else if (name == "info") set_log_level(LogLevel::info);
    else if (name == "debug") set_log_level(LogLevel::debug);
    else return false;
    return true;
}

void init_log_from_env() {
    if (const char* v = std::getenv("FLEXPIPE_LOG")) set_log_level(std::string(v));
}

void log_line(LogLevel level, const std::string& scope, const std::string& msg) {
    if (static_cast<int>(level) > static_cast<int>(log_level())) return;
    std::lock_guard<std::mutex> lk(g_io_mutex);
    std::fprintf(stderr, "[%s] %s: %s\n", level_name(level), scope.c_str(), msg.c_str());
    std::fflush(stderr);
}

} // namespace flexpipe
