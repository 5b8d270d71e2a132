#pragma once

// Helpers shared by the line-oriented model file readers/writers.

#include <charconv>
#include <cmath>
#include <istream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

namespace actauth::io {

class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) { return fmt::format("{}", v); }

inline double parse_double(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ModelFormatError(fmt::format("malformed number '{}'", s));
  }
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

class LineReader {
 public:
  LineReader(std::istream& in, std::string kind) : in_(in), kind_(std::move(kind)) {}

  std::string next() {
    if (!std::getline(in_, line_)) fail("unexpected end of file");
    ++lineno_;
    return line_;
  }

  [[noreturn]] void fail(std::string_view why) const {
    throw ModelFormatError(fmt::format("{} model, line {}: {}", kind_, lineno_, why));
  }

  void expect_header(std::string_view header) {
    if (next() != header) fail(fmt::format("expected header '{}'", header));
  }

  // Reads "key v1 v2 ..." and returns the values.
  std::vector<std::string_view> keyed(std::string_view key, std::size_t arity) {
    next();
    auto parts = split(line_, ' ');
    if (parts.size() != arity + 1 || parts[0] != key) {
      fail(fmt::format("expected '{}' with {} value(s)", key, arity));
    }
    return {parts.begin() + 1, parts.end()};
  }

  double keyed_double(std::string_view key) { return to_double(keyed(key, 1)[0]); }

  std::size_t keyed_size(std::string_view key) {
    auto v = keyed(key, 1)[0];
    std::size_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) fail(fmt::format("malformed count '{}'", v));
    return out;
  }

  std::string keyed_string(std::string_view key) { return std::string(keyed(key, 1)[0]); }

  double to_double(std::string_view s) const {
    try {
      return parse_double(s);
    } catch (const ModelFormatError& e) {
      fail(e.what());
    }
  }

 private:
  std::istream& in_;
  std::string kind_;
  std::string line_;
  std::size_t lineno_ = 0;
};

}  // namespace actauth::io
