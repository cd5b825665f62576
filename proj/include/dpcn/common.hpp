#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace dpcn {

// All recoverable failures in the library throw DpcnError; the CLI turns
// them into a one-line message on stderr and a nonzero exit code.
struct DpcnError : std::runtime_error {
    explicit DpcnError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace log {

enum class Level : int { error = 0, warn = 1, info = 2, debug = 3 };

// Threshold comes from the DPCN_LOG environment variable (error|info|debug),
// default info. Warnings are visible at the default level.
Level threshold();
void write(Level lvl, const std::string& msg);

template <typename... Args>
std::string concat(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    return os.str();
}

template <typename... Args>
void error(Args&&... args) { write(Level::error, concat(std::forward<Args>(args)...)); }
template <typename... Args>
void warn(Args&&... args) { write(Level::warn, concat(std::forward<Args>(args)...)); }
template <typename... Args>
void info(Args&&... args) { write(Level::info, concat(std::forward<Args>(args)...)); }
template <typename... Args>
void debug(Args&&... args) { write(Level::debug, concat(std::forward<Args>(args)...)); }

} // namespace log
} // namespace dpcn
