#pragma once

// Minimal RFC-4180 reader. Internal header.

#include <string>
#include <string_view>
#include <vector>

namespace refinery::detail {

struct CsvRecord {
  std::vector<std::string> fields;
  // Empty unquoted fields read as NULL; a quoted "" is the empty string.
  std::vector<bool> quoted;
  std::size_t line = 0;
};

// Splits `text` into records. Accepts CRLF or LF line endings and a UTF-8
// byte-order mark. Throws SchemaError on an unterminated quoted field.
std::vector<CsvRecord> parse_csv(std::string_view text);

}  // namespace refinery::detail
