#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace remtime {

/// Seconds since 1970-01-01T00:00:00 UTC.
using EpochSeconds = std::int64_t;

inline constexpr double kSecondsPerDay = 86400.0;

/// Format name selecting the built-in ISO-8601 reader. It accepts
/// `YYYY-MM-DD[T| ]hh:mm[:ss[.fff]][Z|+hh:mm|-hh:mm]`; fractional seconds are
/// truncated and offsets are applied so the result is UTC.
inline constexpr std::string_view kIsoFormat = "ISO8601";

/// Parses `text` either with the ISO reader or with a strftime-style format
/// (interpreted as UTC). Throws std::invalid_argument on failure.
EpochSeconds parse_timestamp(std::string_view text, std::string_view format = kIsoFormat);

/// `YYYY-MM-DDThh:mm:ss` (UTC).
std::string format_timestamp(EpochSeconds t);

/// 0 = Monday ... 6 = Sunday.
int day_of_week(EpochSeconds t);
int hour_of_day(EpochSeconds t);

}  // namespace remtime
