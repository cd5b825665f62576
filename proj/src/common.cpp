#include "dpcn/common.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace dpcn::log {

static Level parse_env() {
    const char* v = std::getenv("DPCN_LOG");
    if (!v) return Level::info;
    std::string s(v);
    if (s == "error") return Level::error;
    if (s == "info") return Level::info;
    if (s == "debug") return Level::debug;
    return Level::info;
}

Level threshold() {
    static Level lvl = parse_env();
    return lvl;
}

void write(Level lvl, const std::string& msg) {
    if (static_cast<int>(lvl) > static_cast<int>(threshold())) return;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    const char* tag = lvl == Level::error ? "error" :
                      lvl == Level::warn  ? "warn"  :
                      lvl == Level::info  ? "info"  : "debug";
    std::cerr << "[dpcn:" << tag << "] " << msg << "\n";
}

} // namespace dpcn::log
