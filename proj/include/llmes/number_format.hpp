#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace llmes {

// Shortest decimal string that parses back to exactly `value`.
// Negative zero is written as "0".
std::string shortest_repr(double value);

// Fixed notation with `digits` decimals, for plot coordinates.
std::string fixed_repr(double value, int digits);

// Parses a full decimal literal (std::from_chars grammar, optional leading '+').
std::optional<double> parse_double(std::string_view text);

}  // namespace llmes
