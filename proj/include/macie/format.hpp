#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace macie {

// Shortest decimal text that parses back to exactly `value`.
std::string shortest(double value);

// Locale-independent fixed formatting with `decimals` digits after the point.
std::string fixed(double value, int decimals = 3);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace macie
