#pragma once

// Line-oriented text parsing shared by the descriptor, track, pair and code formats.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "deschash/error.hpp"

namespace deschash::detail {

class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path) : path_(path), in_(path) {
    if (!in_) throw Error("cannot open " + path.string());
  }

  /// Splits the next non-blank line on whitespace. Views stay valid until the next call.
  bool next_nonblank(std::vector<std::string_view>& fields) {
    while (std::getline(in_, buffer_)) {
      ++line_;
      split(buffer_, fields);
      if (!fields.empty()) return true;
    }
    return false;
  }

  /// Next raw line, blank or not.
  bool next_raw(std::string_view& line) {
    if (!std::getline(in_, buffer_)) return false;
    ++line_;
    if (!buffer_.empty() && buffer_.back() == '\r') buffer_.pop_back();
    line = buffer_;
    return true;
  }

  std::size_t line() const { return line_; }

 private:
  static void split(std::string_view s, std::vector<std::string_view>& out) {
    out.clear();
    std::size_t i = 0;
    while (i < s.size()) {
      while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
      std::size_t j = i;
      while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
      if (j > i) out.push_back(s.substr(i, j - i));
      i = j;
    }
  }

  std::filesystem::path path_;
  std::ifstream in_;
  std::string buffer_;
  std::size_t line_ = 0;
};

template <typename Int>
Int parse_integer(std::string_view s, const std::filesystem::path& path, std::size_t line) {
  Int value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError(path.string(), line, "invalid integer \"" + std::string(s) + "\"");
  }
  return value;
}

inline double parse_double(std::string_view s, const std::filesystem::path& path,
                           std::size_t line) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError(path.string(), line, "invalid number \"" + std::string(s) + "\"");
  }
  return value;
}

/// Shortest representation that parses back to the identical double.
inline void append_double(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

inline void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace deschash::detail
