#pragma once

#include <sstream>
#include <string>

namespace starpix::log {

enum class Level { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

// Threshold comes from the STARPIX_LOG env var (debug|info|warn|error|off),
// default info. Resolved once per process.
Level threshold();
void set_threshold(Level level);

void write(Level level, const std::string& message);

namespace detail {
template <typename... Parts>
std::string concat(const Parts&... parts) {
    std::ostringstream os;
    (os << ... << parts);
    return os.str();
}
}  // namespace detail

template <typename... Parts>
void debug(const Parts&... parts) {
    if (threshold() <= Level::Debug) write(Level::Debug, detail::concat(parts...));
}
template <typename... Parts>
void info(const Parts&... parts) {
    if (threshold() <= Level::Info) write(Level::Info, detail::concat(parts...));
}
template <typename... Parts>
void warn(const Parts&... parts) {
    if (threshold() <= Level::Warn) write(Level::Warn, detail::concat(parts...));
}
template <typename... Parts>
void error(const Parts&... parts) {
    if (threshold() <= Level::Error) write(Level::Error, detail::concat(parts...));
}

}  // namespace starpix::log
