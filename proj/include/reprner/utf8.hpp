#pragma once

// Minimal UTF-8 helpers. Feature templates work on Unicode scalar values so
// that Arabic prefixes/suffixes are whole letters, not bytes.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace reprner::utf8 {

/// Byte offsets of each scalar value start, plus a final entry == s.size().
inline std::vector<std::size_t> boundaries(std::string_view s) {
  std::vector<std::size_t> out;
  out.reserve(s.size() + 1);
  std::size_t i = 0;
  while (i < s.size()) {
    out.push_back(i);
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (c >= 0xF0) len = 4;
    else if (c >= 0xE0) len = 3;
    else if (c >= 0xC0) len = 2;
    if (i + len > s.size()) fail_data("truncated UTF-8 sequence");
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80)
        fail_data("invalid UTF-8 continuation byte");
    }
    i += len;
  }
  out.push_back(s.size());
  return out;
}

inline std::size_t length(std::string_view s) { return boundaries(s).size() - 1; }

/// First n scalar values (whole string when shorter).
inline std::string prefix(std::string_view s, std::size_t n) {
  const auto b = boundaries(s);
  const std::size_t len = b.size() - 1;
  return std::string(s.substr(0, b[std::min(n, len)]));
}

/// Last n scalar values (whole string when shorter).
inline std::string suffix(std::string_view s, std::size_t n) {
  const auto b = boundaries(s);
  const std::size_t len = b.size() - 1;
  const std::size_t start = len > n ? b[len - n] : 0;
  return std::string(s.substr(start));
}

}  // namespace reprner::utf8
