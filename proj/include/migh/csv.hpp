#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace migh::csv {

/// Splits one line on ',' honouring double-quoted fields ("" escapes a quote).
std::vector<std::string> split_line(std::string_view line);

/// Quotes a field only when it contains a separator, quote or newline.
std::string escape(std::string_view field);

std::string_view trim(std::string_view s);

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double v);
/// Fixed-point with `decimals` digits.
std::string format_fixed(double v, int decimals);

std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

/// Line reader that skips blank lines and tracks 1-based line numbers.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  bool next(std::vector<std::string>& fields);
  std::size_t line() const noexcept { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

}  // namespace migh::csv
