#pragma once

#include <string>
#include <vector>

namespace dbwqs {

// Doubles print with 17 significant digits so written values parse back
// bit-exactly.
std::string format_g17(double v);

// Minimal CSV: comma-separated, header row, no quoting (cell values must not
// contain commas or newlines).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // throws if missing
};

void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

double parse_double(const std::string& cell);  // throws on garbage

}  // namespace dbwqs
