#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace syntha1c::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  // 1-based line number in the source file for each row, for error reports.
  std::vector<size_t> line_numbers;

  size_t column_index(const std::string& name) const;  // throws if absent
};

// Reads a comma-separated file with a mandatory header row. Lines that are
// empty or start with '#' are skipped (generated artifacts carry a comment
// provenance line). No quoting support: the toolkit's formats never embed
// commas in fields.
Table read_csv(const std::filesystem::path& path);

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows,
               const std::string& comment = "");

// ISO-8601 calendar date (YYYY-MM-DD) to days since 1970-01-01.
int64_t parse_date_days(const std::string& iso_date);
std::string format_date_days(int64_t days);

// Shortest decimal form that round-trips the double; used everywhere a
// float is written to disk so re-runs are byte-identical.
std::string format_double(double value);

double parse_double(const std::string& text, const std::string& context);

}  // namespace syntha1c::csv
