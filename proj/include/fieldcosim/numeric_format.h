#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace fieldcosim {

// Shortest-safe textual form used by every CSV writer: 17 significant digits,
// so that parse_real(format_real(v)) == v bit for bit.
std::string format_real(double value);

// Shortest text that still parses back to the same value ("0.4"), for
// messages and summaries.
std::string format_short(double value);

// Strict full-token parse (no leading/trailing garbage, no locale).
std::optional<double> parse_real(std::string_view text);

std::string_view trim(std::string_view text);

}  // namespace fieldcosim
