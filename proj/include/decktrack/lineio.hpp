#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "decktrack/error.hpp"

namespace decktrack {

// Shared helpers for the line-record file formats. Floating point values are
// written with std::to_chars (shortest form that round-trips exactly), so
// save -> load is bit-exact and output is stable across runs.

inline void append_double(std::string& out, double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  out.append(buf, ptr);
}

inline std::string format_double(double value) {
  std::string s;
  append_double(s, value);
  return s;
}

/// Tokenizing reader for whitespace-separated line records. Blank lines and
/// lines starting with '#' are skipped. Parse errors carry line/field
/// positions in the SchemaViolation message.
class LineReader {
 public:
  explicit LineReader(std::istream& in, std::string name = "input")
      : in_(in), name_(std::move(name)) {}

  bool next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      tokens_.clear();
      std::size_t i = 0;
      while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) tokens_.emplace_back(line.substr(start, i - start));
      }
      if (tokens_.empty() || tokens_[0][0] == '#') continue;
      return true;
    }
    return false;
  }

  std::size_t size() const { return tokens_.size(); }
  int line_number() const { return line_no_; }

  const std::string& token(std::size_t field) const {
    if (field >= tokens_.size()) fail(field, "missing field");
    return tokens_[field];
  }

  void expect_fields(std::size_t n) const {
    if (tokens_.size() != n) {
      fail(tokens_.size(), "expected " + std::to_string(n) + " fields, got " +
                               std::to_string(tokens_.size()));
    }
  }

  long long get_int(std::size_t field) const {
    const std::string& tok = token(field);
    long long value = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      fail(field, "expected integer, got '" + tok + "'");
    }
    return value;
  }

  double get_double(std::size_t field) const {
    const std::string& tok = token(field);
    double value = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      fail(field, "expected number, got '" + tok + "'");
    }
    return value;
  }

  [[noreturn]] void fail(std::size_t field, const std::string& what) const {
    raise(Errc::schema_violation, name_ + " line " + std::to_string(line_no_) + " field " +
                                      std::to_string(field + 1) + ": " + what);
  }

  [[noreturn]] void fail_line(const std::string& what) const {
    raise(Errc::schema_violation, name_ + " line " + std::to_string(line_no_) + ": " + what);
  }

 private:
  std::istream& in_;
  std::string name_;
  int line_no_ = 0;
  std::vector<std::string> tokens_;
};

/// Reads and checks a `<magic> <version>` header line.
inline void expect_header(LineReader& reader, std::string_view magic, long long version) {
  if (!reader.next()) reader.fail_line("empty file, expected header");
  if (reader.size() < 2 || reader.token(0) != magic) {
    reader.fail_line("expected '" + std::string(magic) + "' header");
  }
  if (reader.get_int(1) != version) reader.fail(1, "unsupported schema version");
}

}  // namespace decktrack
