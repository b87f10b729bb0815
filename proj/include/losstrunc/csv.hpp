#pragma once

#include <initializer_list>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace losstrunc {

/// Text for a double: the shortest form that reads back to the same value by
/// default, or "%.*g" at the given significant digits. Infinities print as
/// inf / -inf.
std::string format_double(double v, int significant = 0);

/// RFC-4180 field quoting: fields containing a comma, quote, CR or LF are
/// wrapped in quotes with embedded quotes doubled.
std::string csv_escape(std::string_view field);

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void row(const std::vector<std::string>& fields);
  void row(std::initializer_list<std::string_view> fields);

 private:
  std::ostream& out_;
};

}  // namespace losstrunc
