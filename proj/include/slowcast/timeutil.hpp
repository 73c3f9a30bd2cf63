#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace slowcast {

/// Timezone-naive wall-clock instant, seconds since the Unix epoch.
using Timestamp = std::int64_t;

/// Sampling intervals of the supported datasets.
enum class Frequency { Sec3, Min15, Hour1, Day1 };

std::int64_t step_seconds(Frequency f);
std::string frequency_name(Frequency f);   // "3s", "15min", "1h", "1d"
std::string frequency_text(Frequency f);   // "3 seconds", "15 minutes", ...
Frequency parse_frequency(const std::string& name);

/// Parses "s" with the std::get_time format "fmt". Empty fmt tries the common
/// layouts in order: "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M",
/// "%Y/%m/%d %H:%M", "%Y-%m-%d".
std::optional<Timestamp> try_parse_timestamp(const std::string& s, const std::string& fmt = "");

/// Formats as "YYYY-MM-DD HH:MM:SS".
std::string format_timestamp(Timestamp t);

}  // namespace slowcast
