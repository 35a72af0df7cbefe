#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace cb {

/// UTC instant with millisecond resolution. Serialized as
/// "YYYY-MM-DDTHH:MM:SS.mmmZ", which sorts lexicographically.
using UtcTime = std::chrono::sys_time<std::chrono::milliseconds>;

UtcTime utc_now();
std::string format_utc(UtcTime t);
UtcTime parse_utc(std::string_view text);  // throws Error(SchemaViolation)

}  // namespace cb
