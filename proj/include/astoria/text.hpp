#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace astoria::text {

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char delimiter);

std::optional<std::int64_t> parse_int(std::string_view s);
std::optional<std::uint64_t> parse_uint(std::string_view s);
std::optional<double> parse_double(std::string_view s);

// Calls `fn(line_number, line)` for every line that is neither blank nor a
// `#` comment. The line passed has trailing CR and surrounding spaces removed.
void for_each_record(std::istream& in,
                     const std::function<void(std::size_t, std::string_view)>& fn);

}  // namespace astoria::text
