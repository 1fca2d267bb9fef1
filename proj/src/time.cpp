#include "opsim/time.hpp"
#include "opsim/error.hpp"

#include <array>
#include <cctype>
#include <cstdio>

namespace opsim {

namespace {

// Days since 1970-01-01 for a proleptic Gregorian civil date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y += (m <= 2);
}

bool is_leap(std::int64_t y) {
    return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

unsigned days_in_month(std::int64_t y, unsigned m) {
    static constexpr std::array<unsigned, 12> lengths = {31, 28, 31, 30, 31, 30,
                                                         31, 31, 30, 31, 30, 31};
    if (m == 2 && is_leap(y)) return 29;
    return lengths[m - 1];
}

} // namespace

TimePoint parse_iso8601(const std::string& text) {
    // Strict "YYYY-MM-DDTHH:MM:SS"
    auto fail = [&]() -> TimePoint {
        throw ValidationError("invalid ISO-8601 timestamp: '" + text + "'");
    };
    if (text.size() != 19) fail();
    for (size_t i = 0; i < 19; ++i) {
        char c = text[i];
        switch (i) {
            case 4:
            case 7:
                if (c != '-') fail();
                break;
            case 10:
                if (c != 'T' && c != ' ') fail();
                break;
            case 13:
            case 16:
                if (c != ':') fail();
                break;
            default:
                if (!std::isdigit(static_cast<unsigned char>(c))) fail();
        }
    }
    auto num = [&](size_t pos, size_t len) {
        std::int64_t v = 0;
        for (size_t i = pos; i < pos + len; ++i) v = v * 10 + (text[i] - '0');
        return v;
    };
    const std::int64_t y = num(0, 4);
    const auto mo = static_cast<unsigned>(num(5, 2));
    const auto da = static_cast<unsigned>(num(8, 2));
    const std::int64_t hh = num(11, 2);
    const std::int64_t mi = num(14, 2);
    const std::int64_t ss = num(17, 2);
    if (mo < 1 || mo > 12) fail();
    if (da < 1 || da > days_in_month(y, mo)) fail();
    if (hh > 23 || mi > 59 || ss > 59) fail();
    return TimePoint(days_from_civil(y, mo, da) * 86400 + hh * 3600 + mi * 60 + ss);
}

std::string format_iso8601(TimePoint t) {
    std::int64_t days = t.epoch_s / 86400;
    std::int64_t rem = t.epoch_s % 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    std::int64_t y;
    unsigned mo, da;
    civil_from_days(days, y, mo, da);
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:%02lld",
                  static_cast<long long>(y), mo, da, static_cast<long long>(rem / 3600),
                  static_cast<long long>((rem % 3600) / 60), static_cast<long long>(rem % 60));
    return buf;
}

TimeSpan parse_duration(const std::string& text) {
    size_t i = 0;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
    if (i == 0 || i == text.size())
        throw ValidationError("invalid duration: '" + text + "' (expected e.g. \"15min\", \"1h\")");
    std::int64_t value = 0;
    for (size_t k = 0; k < i; ++k) value = value * 10 + (text[k] - '0');
    const std::string unit = text.substr(i);
    if (unit == "s") return TimeSpan(value);
    if (unit == "min" || unit == "m") return TimeSpan::minutes(value);
    if (unit == "h") return TimeSpan::hours(value);
    if (unit == "d") return TimeSpan::days(value);
    throw ValidationError("invalid duration unit in '" + text + "' (use s, min, h or d)");
}

std::string format_duration(TimeSpan d) {
    const std::int64_t s = d.seconds;
    if (s % 86400 == 0 && s != 0) return std::to_string(s / 86400) + "d";
    if (s % 3600 == 0 && s != 0) return std::to_string(s / 3600) + "h";
    if (s % 60 == 0 && s != 0) return std::to_string(s / 60) + "min";
    return std::to_string(s) + "s";
}

} // namespace opsim
