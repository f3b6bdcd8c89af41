#ifndef HGR_TEXT_IO_HPP_
#define HGR_TEXT_IO_HPP_

// Small helpers shared by the text file formats.

#include <charconv>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "hgr/core_model.hpp"

namespace hgr {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    out.push_back(trim(s.substr(pos, next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view text, const std::string& source, std::size_t line) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ParseError(source, line, "invalid number '" + std::string(text) + "'");
  }
  return value;
}

/// Shortest decimal text that reads back to the identical double.
inline std::string format_number(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace hgr

#endif  // HGR_TEXT_IO_HPP_
