#pragma once

#include <cstdint>
#include <string>

namespace opsim {

// Civil time handling for simulation timelines. All timestamps are UTC
// seconds since the Unix epoch; durations are whole seconds. Sub-second
// resolutions are out of scope for the engine.

struct TimeSpan {
    std::int64_t seconds = 0;

    constexpr TimeSpan() = default;
    constexpr explicit TimeSpan(std::int64_t s) : seconds(s) {}

    static constexpr TimeSpan minutes(std::int64_t m) { return TimeSpan(m * 60); }
    static constexpr TimeSpan hours(std::int64_t h) { return TimeSpan(h * 3600); }
    static constexpr TimeSpan days(std::int64_t d) { return TimeSpan(d * 86400); }

    constexpr double to_hours() const { return static_cast<double>(seconds) / 3600.0; }

    constexpr bool positive() const { return seconds > 0; }
    constexpr bool multiple_of(TimeSpan other) const {
        return other.seconds != 0 && seconds % other.seconds == 0;
    }

    friend constexpr TimeSpan operator*(TimeSpan a, std::int64_t k) { return TimeSpan(a.seconds * k); }
    friend constexpr TimeSpan operator+(TimeSpan a, TimeSpan b) { return TimeSpan(a.seconds + b.seconds); }
    friend constexpr TimeSpan operator-(TimeSpan a, TimeSpan b) { return TimeSpan(a.seconds - b.seconds); }
    friend constexpr auto operator<=>(TimeSpan a, TimeSpan b) = default;
};

struct TimePoint {
    std::int64_t epoch_s = 0;

    constexpr TimePoint() = default;
    constexpr explicit TimePoint(std::int64_t s) : epoch_s(s) {}

    friend constexpr TimePoint operator+(TimePoint t, TimeSpan d) { return TimePoint(t.epoch_s + d.seconds); }
    friend constexpr TimePoint operator-(TimePoint t, TimeSpan d) { return TimePoint(t.epoch_s - d.seconds); }
    friend constexpr TimeSpan operator-(TimePoint a, TimePoint b) { return TimeSpan(a.epoch_s - b.epoch_s); }
    friend constexpr auto operator<=>(TimePoint a, TimePoint b) = default;
};

// "YYYY-MM-DDTHH:MM:SS" (UTC, no zone suffix). Throws ValidationError on
// malformed input.
TimePoint parse_iso8601(const std::string& text);
std::string format_iso8601(TimePoint t);

// "15min", "1h", "24h", "2d", "90s". Throws ValidationError on malformed input.
TimeSpan parse_duration(const std::string& text);
std::string format_duration(TimeSpan d);

} // namespace opsim
