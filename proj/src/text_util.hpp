#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace skillopt::detail {

inline bool is_blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\f\v") == std::string_view::npos;
}

inline std::string_view lstrip(std::string_view s) {
  const auto pos = s.find_first_not_of(" \t\r\n\f\v");
  return pos == std::string_view::npos ? std::string_view{} : s.substr(pos);
}

inline std::string_view rstrip(std::string_view s) {
  const auto pos = s.find_last_not_of(" \t\r\n\f\v");
  return pos == std::string_view::npos ? std::string_view{} : s.substr(0, pos + 1);
}

inline std::string_view strip(std::string_view s) { return rstrip(lstrip(s)); }

inline std::string collapse_ws(std::string_view s) {
  std::string out;
  bool pending = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      pending = !out.empty();
    } else {
      if (pending) out.push_back(' ');
      pending = false;
      out.push_back(c);
    }
  }
  return out;
}

// Splits on '\n' and drops a trailing '\r' from each line, so CRLF input
// parses like LF input.
inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) {
      std::string_view line = text.substr(start);
      if (!line.empty() || start < text.size() || start == 0) {
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.emplace_back(line);
      }
      break;
    }
    std::string_view line = text.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = pos + 1;
  }
  return lines;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

inline std::vector<std::string> split_on(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.emplace_back(s.substr(start));
      break;
    }
    parts.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return parts;
}

}  // namespace skillopt::detail
