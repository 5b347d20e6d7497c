#pragma once

// Minimal RFC 4180 reader/writer used by the trial and report formats.

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace affect_sdt::csv {

struct Row {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

// Reads all records. Quoted fields may contain commas, doubled quotes and line
// breaks. A trailing CR before LF is dropped. Throws ParseError on an
// unterminated quote.
std::vector<Row> read(std::istream& in);

// Quotes when the field contains a delimiter, quote, CR or LF, or when forced.
std::string escape(std::string_view field, bool force_quotes = false);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace affect_sdt::csv
