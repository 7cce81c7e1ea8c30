#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace flowmoods::text {

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view s) noexcept;
bool parse_double(std::string_view s, double& out) noexcept;
bool parse_int64(std::string_view s, std::int64_t& out) noexcept;
/// Fixed-point formatting, e.g. format_fixed(0.5, 6) == "0.500000".
std::string format_fixed(double value, int decimals);
/// Shortest text that parses back to exactly `value`.
std::string format_exact(double value);

}  // namespace flowmoods::text
