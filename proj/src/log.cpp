#include "forgetq/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace forgetq::log {

namespace {

std::atomic<Level> g_level{Level::kWarn};
std::mutex g_mutex;

const char* name(Level level) {
    switch (level) {
        case Level::kDebug: return "debug";
        case Level::kInfo: return "info";
        case Level::kWarn: return "warn";
        case Level::kError: return "error";
        case Level::kOff: return "off";
    }
    return "?";
}

}  // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

bool parse_level(std::string_view text, Level& out) {
    for (Level l : {Level::kDebug, Level::kInfo, Level::kWarn, Level::kError, Level::kOff}) {
        if (text == name(l)) {
            out = l;
            return true;
        }
    }
    return false;
}

void write(Level lvl, std::string_view module, std::string_view message,
           std::initializer_list<Counter> counters) {
    if (lvl < g_level.load()) return;
    std::string line = "level=";
    line += name(lvl);
    line += " module=";
    line += module;
    line += " msg=\"";
    for (char c : message) {
        if (c == '"' || c == '\\') line.push_back('\\');
        line.push_back(c == '\n' ? ' ' : c);
    }
    line += '"';
    for (const auto& [key, value] : counters) {
        line += ' ';
        line += key;
        line += '=';
        line += std::to_string(value);
    }
    line += '\n';
    const std::lock_guard lock(g_mutex);
    std::cerr << line;
}

}  // namespace forgetq::log
