#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace forgetq {

/// UTC instant with millisecond resolution (dump timestamps carry fractional
/// seconds, e.g. "2008-07-31T21:42:52.667").
class Timestamp {
public:
    constexpr Timestamp() = default;
    constexpr explicit Timestamp(std::int64_t millis) : millis_(millis) {}

    [[nodiscard]] constexpr std::int64_t millis() const { return millis_; }

    static Timestamp from_civil(int year, unsigned month, unsigned day, int hour = 0,
                                int minute = 0, int second = 0, int millis = 0);

    /// ISO-8601 "YYYY-MM-DD[THH:MM[:SS[.fff]]][Z]". A missing zone is read as
    /// UTC; explicit non-UTC offsets are rejected.
    static std::optional<Timestamp> parse(std::string_view text);

    /// "YYYY-MM-DDTHH:MM:SS.fff", the dump attribute format.
    [[nodiscard]] std::string iso() const;
    /// Filesystem-safe compact form, "YYYYMMDDTHHMMSSfffZ".
    [[nodiscard]] std::string compact() const;

    constexpr auto operator<=>(const Timestamp&) const = default;

private:
    std::int64_t millis_ = 0;
};

inline constexpr std::int64_t kMillisPerMinute = 60'000;
inline constexpr std::int64_t kMillisPerDay = 86'400'000;
/// Fixed month length used for all fractional-month quantities.
inline constexpr double kDaysPerMonth = 30.44;
inline constexpr double kMillisPerMonth = kDaysPerMonth * static_cast<double>(kMillisPerDay);

inline double minutes_between(Timestamp from, Timestamp to) {
    return static_cast<double>(to.millis() - from.millis()) / static_cast<double>(kMillisPerMinute);
}
inline double days_between(Timestamp from, Timestamp to) {
    return static_cast<double>(to.millis() - from.millis()) / static_cast<double>(kMillisPerDay);
}
inline double months_between(Timestamp from, Timestamp to) {
    return static_cast<double>(to.millis() - from.millis()) / kMillisPerMonth;
}

/// Shift by a (possibly fractional) number of fixed-length months.
inline Timestamp add_months(Timestamp t, double months) {
    return Timestamp{t.millis() + static_cast<std::int64_t>(months * kMillisPerMonth)};
}

}  // namespace forgetq
