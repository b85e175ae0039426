#include "cimle/log.hpp"

#include <cstdlib>
#include <iostream>

namespace cimle {

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("CIMLE_LOG");
        if (env == nullptr) return LogLevel::Quiet;
        const std::string v(env);
        if (v == "debug") return LogLevel::Debug;
        if (v == "info") return LogLevel::Info;
        return LogLevel::Quiet;
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::Info) std::cerr << "[cimle] " << msg << "\n";
}

void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::Debug) std::cerr << "[cimle:dbg] " << msg << "\n";
}

} // namespace cimle
