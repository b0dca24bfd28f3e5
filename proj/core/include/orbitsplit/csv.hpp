#pragma once

#include <charconv>
#include <concepts>
#include <cstdint>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace orbitsplit {

// Shortest round-trip decimal form.
inline std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::initializer_list<std::string_view> header) : out_(out) {
    write_fields(std::vector<std::string>(header.begin(), header.end()));
  }
  CsvWriter(std::ostream& out, const std::vector<std::string>& header) : out_(out) {
    write_fields(header);
  }

  template <typename... Fields>
  void row(const Fields&... fields) {
    write_fields(std::vector<std::string>{to_field(fields)...});
  }

  void write_fields(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << fields[i];
    }
    out_ << '\n';
  }

  static std::string to_field(const std::string& s) { return s; }
  static std::string to_field(std::string_view s) { return std::string(s); }
  static std::string to_field(const char* s) { return s; }
  static std::string to_field(std::floating_point auto x) { return format_number(static_cast<double>(x)); }
  static std::string to_field(std::integral auto x) { return std::to_string(x); }

 private:
  std::ostream& out_;
};

}  // namespace orbitsplit
