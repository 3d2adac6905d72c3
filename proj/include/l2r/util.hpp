#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace l2r {

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = kFnvOffset;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

/// 16 lowercase hex digits.
std::string hex64(std::uint64_t value);

std::string_view trim(std::string_view s) noexcept;
std::string to_lower(std::string_view s);
std::vector<std::string> split_lines(std::string_view text);

/// Shortest decimal that round-trips, always with a fractional part ("1.0", "0.9").
std::string format_decimal(double value);

/// Strict decimal parse of the whole (trimmed) string; nullopt-like failure reported via bool.
bool parse_double(std::string_view text, double& out);

using Clock = std::function<std::string()>;

/// Current UTC time as RFC3339 with second precision, e.g. 2024-01-02T03:04:05Z.
std::string now_rfc3339();

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace l2r
