#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace adabayes::cli {

/// Shortest decimal that round-trips to the same double.
std::string format_real(double value);

/// Whole-token parses; std::nullopt on any trailing garbage or overflow.
std::optional<double> parse_real(std::string_view text);
std::optional<std::uint64_t> parse_unsigned(std::string_view text);

std::string_view trim(std::string_view text) noexcept;

/// Space-separated reals in round-trip form.
std::string join_reals(std::span<const double> values);

}  // namespace adabayes::cli
