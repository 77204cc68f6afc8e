#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace alrnn {

/// Shortest decimal representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return std::to_string(v);
  return std::string(buf, ptr);
}

}  // namespace alrnn
