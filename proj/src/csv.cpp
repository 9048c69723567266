#include "csv.hpp"

#include "refinery/errors.hpp"

namespace refinery::detail {

std::vector<CsvRecord> parse_csv(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::vector<CsvRecord> records;
  CsvRecord current;
  std::string field;
  bool field_quoted = false;
  bool in_quotes = false;
  bool record_open = false;
  std::size_t line = 1;
  current.line = line;

  auto end_field = [&] {
    current.fields.push_back(std::move(field));
    current.quoted.push_back(field_quoted);
    field.clear();
    field_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(current));
    current = CsvRecord{};
    current.line = line;
    record_open = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        field_quoted = true;
        record_open = true;
        break;
      case ',':
        end_field();
        record_open = true;
        break;
      case '\r':
        break;
      case '\n':
        ++line;
        if (record_open || !field.empty()) end_record();
        else current.line = line;
        break;
      default:
        field += c;
        record_open = true;
    }
  }
  if (in_quotes) throw SchemaError("unterminated quoted field starting near line " + std::to_string(current.line));
  if (record_open || !field.empty()) end_record();
  return records;
}

}  // namespace refinery::detail
