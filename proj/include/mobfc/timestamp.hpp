#pragma once

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mobfc {

// Naive wall-clock timestamp with second precision. No timezone, no leap seconds.
class Timestamp {
public:
    using clock_seconds = std::chrono::sys_seconds;

    constexpr Timestamp() = default;
    constexpr explicit Timestamp(clock_seconds t) : t_(t) {}

    static Timestamp from_civil(int year, unsigned month, unsigned day,
                                int hour = 0, int minute = 0, int second = 0) {
        using namespace std::chrono;
        const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                 std::chrono::day{day}};
        if (!ymd.ok()) throw std::invalid_argument("invalid calendar date");
        return Timestamp{sys_days{ymd} + hours{hour} + minutes{minute} + seconds{second}};
    }

    static constexpr Timestamp from_epoch_seconds(std::int64_t s) {
        return Timestamp{clock_seconds{std::chrono::seconds{s}}};
    }

    constexpr std::int64_t epoch_seconds() const { return t_.time_since_epoch().count(); }
    constexpr clock_seconds time_point() const { return t_; }

    std::chrono::year_month_day date() const {
        return std::chrono::year_month_day{std::chrono::floor<std::chrono::days>(t_)};
    }
    int year() const { return static_cast<int>(date().year()); }
    unsigned month() const { return static_cast<unsigned>(date().month()); }
    unsigned day() const { return static_cast<unsigned>(date().day()); }
    int hour() const { return static_cast<int>(seconds_of_day() / 3600); }
    int minute() const { return static_cast<int>(seconds_of_day() % 3600 / 60); }
    int second() const { return static_cast<int>(seconds_of_day() % 60); }

    // Monday=0 .. Sunday=6
    int day_of_week() const {
        const std::chrono::weekday wd{std::chrono::floor<std::chrono::days>(t_)};
        return static_cast<int>(wd.iso_encoding()) - 1;
    }

    // Midnight of the same calendar day.
    Timestamp floor_day() const { return Timestamp{std::chrono::floor<std::chrono::days>(t_)}; }
    Timestamp floor_hour() const { return Timestamp{std::chrono::floor<std::chrono::hours>(t_)}; }

    constexpr Timestamp operator+(std::chrono::seconds d) const { return Timestamp{t_ + d}; }
    constexpr std::chrono::seconds operator-(Timestamp o) const { return t_ - o.t_; }
    constexpr auto operator<=>(const Timestamp&) const = default;

    // "YYYY-MM-DD HH:MM:SS"
    std::string to_string() const {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02d:%02d:%02d", year(), month(), day(),
                      hour(), minute(), second());
        return buf;
    }

private:
    std::int64_t seconds_of_day() const {
        return (t_ - std::chrono::floor<std::chrono::days>(t_)).count();
    }

    clock_seconds t_{};
};

inline constexpr std::string_view kDefaultTimestampFormat = "%Y-%m-%d %H:%M:%S";

namespace detail {

inline bool read_int(std::string_view s, std::size_t& pos, std::size_t max_digits, int& out) {
    std::size_t end = pos;
    while (end < s.size() && end - pos < max_digits && s[end] >= '0' && s[end] <= '9') ++end;
    if (end == pos) return false;
    auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + end, out);
    if (ec != std::errc{}) return false;
    pos = end;
    return true;
}

}  // namespace detail

// Parses `text` against a strftime-like format supporting %Y %m %d %H %M %S and %%.
// Any other character must match literally. Returns nullopt on mismatch or an invalid date.
inline std::optional<Timestamp> parse_timestamp(std::string_view text,
                                                std::string_view format = kDefaultTimestampFormat) {
    int year = 1970, month = 1, day = 1, hour = 0, minute = 0, second = 0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < format.size(); ++i) {
        if (format[i] != '%') {
            if (pos >= text.size() || text[pos] != format[i]) return std::nullopt;
            ++pos;
            continue;
        }
        if (++i == format.size()) return std::nullopt;
        bool ok = true;
        switch (format[i]) {
            case 'Y': ok = detail::read_int(text, pos, 4, year); break;
            case 'm': ok = detail::read_int(text, pos, 2, month); break;
            case 'd': ok = detail::read_int(text, pos, 2, day); break;
            case 'H': ok = detail::read_int(text, pos, 2, hour); break;
            case 'M': ok = detail::read_int(text, pos, 2, minute); break;
            case 'S': ok = detail::read_int(text, pos, 2, second); break;
            case '%':
                ok = pos < text.size() && text[pos] == '%';
                ++pos;
                break;
            default: return std::nullopt;
        }
        if (!ok) return std::nullopt;
    }
    if (pos != text.size()) return std::nullopt;
    if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 59)
        return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{year},
                                          std::chrono::month{static_cast<unsigned>(month)},
                                          std::chrono::day{static_cast<unsigned>(day)}};
    if (!ymd.ok()) return std::nullopt;
    return Timestamp::from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day),
                                 hour, minute, second);
}

}  // namespace mobfc
