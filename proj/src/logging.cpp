#include "opsim/logging.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

namespace opsim {

namespace {
LogLevel g_level = LogLevel::Warn;
std::ofstream g_sink;

const char* level_name(LogLevel l) {
    switch (l) {
        case LogLevel::Debug: return "debug";
        case LogLevel::Info: return "info";
        case LogLevel::Warn: return "warn";
        case LogLevel::Error: return "error";
        default: return "off";
    }
}
} // namespace

void set_log_level(LogLevel level) { g_level = level; }
LogLevel log_level() { return g_level; }

void init_log_level_from_env() {
    const char* env = std::getenv("OPSIM_LOG");
    if (env == nullptr) return;
    const std::string v(env);
    if (v == "debug") g_level = LogLevel::Debug;
    else if (v == "info") g_level = LogLevel::Info;
    else if (v == "warn") g_level = LogLevel::Warn;
    else if (v == "error") g_level = LogLevel::Error;
    else if (v == "off") g_level = LogLevel::Off;
}

void set_log_sink_file(const std::string& path) {
    close_log_sink();
    if (!path.empty()) g_sink.open(path, std::ios::out | std::ios::app);
}

void close_log_sink() {
    if (g_sink.is_open()) g_sink.close();
}

void log(LogLevel level, const std::string& msg) {
    if (g_sink.is_open()) g_sink << "[" << level_name(level) << "] " << msg << "\n";
    if (static_cast<int>(level) < static_cast<int>(g_level)) return;
    std::cerr << "[opsim " << level_name(level) << "] " << msg << "\n";
}

} // namespace opsim
