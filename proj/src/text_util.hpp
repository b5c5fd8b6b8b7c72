#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "gridtop/grid.hpp"

// Internal text/hash helpers.  All formatting is locale-free so that output
// files are byte-stable across runs and machines.

namespace gridtop::detail {

std::string slurp(const std::string& path);  // throws ParseError if unreadable
void spew(const std::string& path, const std::string& content);

// Splits into non-empty lines; strips trailing '\r' and '#' comments.
// Owning copies so callers may pass a temporary (e.g. slurp(path)) directly.
std::vector<std::string> content_lines(std::string_view text);
std::vector<std::string_view> tokens(std::string_view line);

// Parse helpers throwing ParseError with `where` (e.g. "file:line") and the
// offending field name in the message.
double parse_double(std::string_view tok, const std::string& where,
                    const char* field);
long long parse_int(std::string_view tok, const std::string& where,
                    const char* field);

// Shortest round-trip representation (std::to_chars).
std::string fmt_double(double v);

// Fixed 6-decimal representation used by CSV injections.
inline std::string fmt_fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::string hex64(std::uint64_t v);

}  // namespace gridtop::detail
