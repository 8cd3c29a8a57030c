#include "starpix/common/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace starpix::log {

namespace {

Level parse_env() {
    const char* raw = std::getenv("STARPIX_LOG");
    if (raw == nullptr) return Level::Info;
    if (std::strcmp(raw, "debug") == 0) return Level::Debug;
    if (std::strcmp(raw, "info") == 0) return Level::Info;
    if (std::strcmp(raw, "warn") == 0) return Level::Warn;
    if (std::strcmp(raw, "error") == 0) return Level::Error;
    if (std::strcmp(raw, "off") == 0) return Level::Off;
    return Level::Info;
}

Level g_threshold = parse_env();

const char* level_tag(Level level) {
    switch (level) {
        case Level::Debug: return "debug";
        case Level::Info: return "info";
        case Level::Warn: return "warn";
        case Level::Error: return "error";
        default: return "?";
    }
}

}  // namespace

Level threshold() { return g_threshold; }

void set_threshold(Level level) { g_threshold = level; }

void write(Level level, const std::string& message) {
    std::fprintf(stderr, "[%s] %s\n", level_tag(level), message.c_str());
}

}  // namespace starpix::log
