#include "treenav/log.hpp"

#include <cstdio>
#include <cstdlib>

namespace treenav::log {

namespace {

Level parse_env() {
    const char* v = std::getenv("TREENAV_LOG");
    if (!v) return Level::Info;
    std::string s(v);
    if (s == "debug") return Level::Debug;
    if (s == "info") return Level::Info;
    if (s == "warn") return Level::Warn;
    if (s == "error") return Level::Error;
    return Level::Info;
}

const char* tag(Level l) {
    switch (l) {
        case Level::Debug: return "debug";
        case Level::Info: return "info";
        case Level::Warn: return "warn";
        case Level::Error: return "error";
    }
    return "?";
}

}  // namespace

Level threshold() {
    static Level cached = parse_env();
    return cached;
}

void emit(Level level, const std::string& msg) {
    if (level < threshold()) return;
    std::fprintf(stderr, "[%s] %s\n", tag(level), msg.c_str());
}

}  // namespace treenav::log
