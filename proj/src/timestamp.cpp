#include "forgetq/timestamp.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

namespace forgetq {

namespace {

bool read_int(std::string_view text, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > text.size()) return false;
    const char* first = text.data() + pos;
    for (std::size_t i = 0; i < len; ++i) {
        if (first[i] < '0' || first[i] > '9') return false;
    }
    return std::from_chars(first, first + len, out).ec == std::errc{};
}

struct Civil {
    int year;
    unsigned month;
    unsigned day;
    int hour;
    int minute;
    int second;
    int millis;
};

Civil to_civil(std::int64_t millis) {
    using namespace std::chrono;
    const sys_time<milliseconds> tp{milliseconds{millis}};
    const auto day_point = floor<days>(tp);
    const year_month_day ymd{day_point};
    std::int64_t rest = (tp - day_point).count();
    Civil c{};
    c.year = static_cast<int>(ymd.year());
    c.month = static_cast<unsigned>(ymd.month());
    c.day = static_cast<unsigned>(ymd.day());
    c.hour = static_cast<int>(rest / 3'600'000);
    rest %= 3'600'000;
    c.minute = static_cast<int>(rest / 60'000);
    rest %= 60'000;
    c.second = static_cast<int>(rest / 1000);
    c.millis = static_cast<int>(rest % 1000);
    return c;
}

}  // namespace

Timestamp Timestamp::from_civil(int year, unsigned month, unsigned day, int hour, int minute,
                                int second, int millis) {
    using namespace std::chrono;
    const sys_days d{std::chrono::year{year} / std::chrono::month{month} / std::chrono::day{day}};
    const auto base = duration_cast<milliseconds>(d.time_since_epoch()).count();
    return Timestamp{base + hour * 3'600'000LL + minute * 60'000LL + second * 1000LL + millis};
}

std::optional<Timestamp> Timestamp::parse(std::string_view text) {
    int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0, millis = 0;
    if (!read_int(text, 0, 4, year) || text.size() < 10 || text[4] != '-' ||
        !read_int(text, 5, 2, month) || text[7] != '-' || !read_int(text, 8, 2, day)) {
        return std::nullopt;
    }
    std::size_t pos = 10;
    if (pos < text.size() && (text[pos] == 'T' || text[pos] == ' ')) {
        if (!read_int(text, pos + 1, 2, hour) || pos + 3 >= text.size() || text[pos + 3] != ':' ||
            !read_int(text, pos + 4, 2, minute)) {
            return std::nullopt;
        }
        pos += 6;
        if (pos < text.size() && text[pos] == ':') {
            if (!read_int(text, pos + 1, 2, second)) return std::nullopt;
            pos += 3;
            if (pos < text.size() && text[pos] == '.') {
                ++pos;
                std::size_t digits = 0;
                int scale = 100;
                while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
                    // Sub-millisecond digits are truncated.
                    if (digits < 3) millis += (text[pos] - '0') * scale;
                    scale /= 10;
                    ++digits;
                    ++pos;
                }
                if (digits == 0) return std::nullopt;
            }
        }
    }
    if (pos < text.size()) {
        if (text.substr(pos) == "Z" || text.substr(pos) == "+00:00") {
            pos = text.size();
        } else {
            return std::nullopt;
        }
    }
    if (month < 1 || month > 12 || hour > 23 || minute > 59 || second > 60) return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{year},
                                          std::chrono::month{static_cast<unsigned>(month)},
                                          std::chrono::day{static_cast<unsigned>(day)}};
    if (!ymd.ok()) return std::nullopt;
    return from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day), hour, minute,
                      second, millis);
}

std::string Timestamp::iso() const {
    const Civil c = to_civil(millis_);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03d", c.year, c.month, c.day,
                  c.hour, c.minute, c.second, c.millis);
    return buf;
}

std::string Timestamp::compact() const {
    const Civil c = to_civil(millis_);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d%02u%02uT%02d%02d%02d%03dZ", c.year, c.month, c.day,
                  c.hour, c.minute, c.second, c.millis);
    return buf;
}

}  // namespace forgetq
