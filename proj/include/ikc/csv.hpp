#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace ikc {

// Shortest round-trip decimal form (std::to_chars). Exact on re-parse and
// deterministic, which the byte-identical-outputs guarantee relies on.
std::string format_double(double v);

double parse_double(const std::string& s, const std::string& context);
std::int64_t parse_int(const std::string& s, const std::string& context);

// Splits one CSV line. Handles double-quoted fields (Bank CSVs quote all
// categoricals) and trims surrounding whitespace of unquoted fields.
std::vector<std::string> split_csv_line(const std::string& line, char delimiter);

// Reads a whole delimited file into rows of fields; skips blank lines.
std::vector<std::vector<std::string>> read_delimited(const std::string& path,
                                                     char delimiter);

void write_csv_row(std::ostream& os, const std::vector<std::string>& fields);

}  // namespace ikc
