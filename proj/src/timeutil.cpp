#include "slowcast/timeutil.hpp"

#include <array>
#include <cstdio>
#include <ctime>
#include <iomanip>
#include <sstream>

#include "slowcast/errors.hpp"

namespace slowcast {

std::int64_t step_seconds(Frequency f) {
    switch (f) {
        case Frequency::Sec3: return 3;
        case Frequency::Min15: return 15 * 60;
        case Frequency::Hour1: return 3600;
        case Frequency::Day1: return 86400;
    }
    return 3600;
}

std::string frequency_name(Frequency f) {
    switch (f) {
        case Frequency::Sec3: return "3s";
        case Frequency::Min15: return "15min";
        case Frequency::Hour1: return "1h";
        case Frequency::Day1: return "1d";
    }
    return "1h";
}

std::string frequency_text(Frequency f) {
    switch (f) {
        case Frequency::Sec3: return "3 seconds";
        case Frequency::Min15: return "15 minutes";
        case Frequency::Hour1: return "1 hour";
        case Frequency::Day1: return "1 day";
    }
    return "1 hour";
}

Frequency parse_frequency(const std::string& name) {
    if (name == "3s") return Frequency::Sec3;
    if (name == "15min") return Frequency::Min15;
    if (name == "1h") return Frequency::Hour1;
    if (name == "1d") return Frequency::Day1;
    throw ConfigInvalid("frequency", "unknown value '" + name + "' (expected 3s|15min|1h|1d)");
}

namespace {

std::optional<Timestamp> parse_with_format(const std::string& s, const char* fmt) {
    std::tm tm{};
    std::istringstream in(s);
    in >> std::get_time(&tm, fmt);
    if (in.fail()) return std::nullopt;
    // Anything left besides whitespace means the format did not cover the input.
    char c;
    while (in.get(c)) {
        if (!std::isspace(static_cast<unsigned char>(c))) return std::nullopt;
    }
    tm.tm_isdst = 0;
    std::time_t t = timegm(&tm);
    if (t == static_cast<std::time_t>(-1)) return std::nullopt;
    return static_cast<Timestamp>(t);
}

}  // namespace

std::optional<Timestamp> try_parse_timestamp(const std::string& s, const std::string& fmt) {
    if (!fmt.empty()) return parse_with_format(s, fmt.c_str());
    static const std::array<const char*, 5> kFormats = {
        "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M", "%Y/%m/%d %H:%M",
        "%Y-%m-%d"};
    for (const char* f : kFormats) {
        if (auto t = parse_with_format(s, f)) return t;
    }
    return std::nullopt;
}

std::string format_timestamp(Timestamp t) {
    std::time_t tt = static_cast<std::time_t>(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:%02d:%02d", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

}  // namespace slowcast
