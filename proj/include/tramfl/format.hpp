#pragma once

#include <charconv>
#include <string>
#include <string_view>
#include <system_error>

namespace tramfl {

// Shortest decimal that round-trips to the same double; "." separator always.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Whole-field parse; rejects leading '+', trailing junk and empty input.
template <typename T>
bool parse_number(std::string_view text, T& out) {
  if (text.empty()) return false;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc{} && res.ptr == text.data() + text.size();
}

}  // namespace tramfl
