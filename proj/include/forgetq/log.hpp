#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>

namespace forgetq::log {

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kOff = 4 };

void set_level(Level level);
Level level();
/// Accepts debug|info|warn|error|off.
bool parse_level(std::string_view text, Level& out);

using Counter = std::pair<std::string_view, std::int64_t>;

/// One structured line on stderr: `level=... module=... msg="..." k=v ...`.
void write(Level level, std::string_view module, std::string_view message,
           std::initializer_list<Counter> counters = {});

inline void info(std::string_view module, std::string_view message,
                 std::initializer_list<Counter> counters = {}) {
    write(Level::kInfo, module, message, counters);
}
inline void warn(std::string_view module, std::string_view message,
                 std::initializer_list<Counter> counters = {}) {
    write(Level::kWarn, module, message, counters);
}
inline void error(std::string_view module, std::string_view message,
                  std::initializer_list<Counter> counters = {}) {
    write(Level::kError, module, message, counters);
}

}  // namespace forgetq::log
