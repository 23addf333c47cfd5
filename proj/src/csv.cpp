#include "syntha1c/csv.hpp"

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace syntha1c::csv {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(field);
  return fields;
}

}  // namespace

size_t Table::column_index(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw std::runtime_error("csv: missing column '" + name + "'");
}

Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("csv: cannot open " + path.string());
  }
  Table table;
  std::string line;
  size_t line_number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_line(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw std::runtime_error("csv: " + path.string() + " line " +
                               std::to_string(line_number) + ": expected " +
                               std::to_string(table.header.size()) +
                               " fields, found " +
                               std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_number);
  }
  if (!have_header) {
    throw std::runtime_error("csv: " + path.string() + " has no header row");
  }
  return table;
}

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows,
               const std::string& comment) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("csv: cannot write " + path.string());
  }
  if (!comment.empty()) {
    out << "# " << comment << "\n";
  }
  for (size_t i = 0; i < header.size(); ++i) {
    if (i) out << ',';
    out << header[i];
  }
  out << '\n';
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  }
  if (!out) {
    throw std::runtime_error("csv: write failed for " + path.string());
  }
}

int64_t parse_date_days(const std::string& iso_date) {
  int year = 0, month = 0, day = 0;
  char dash1 = 0, dash2 = 0;
  std::istringstream in(iso_date);
  in >> year >> dash1 >> month >> dash2 >> day;
  if (!in || dash1 != '-' || dash2 != '-') {
    throw std::runtime_error("invalid ISO-8601 date '" + iso_date + "'");
  }
  // Negative month/day would have consumed the dashes as signs.
  const std::chrono::year_month_day ymd{
      std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
      std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok()) {
    throw std::runtime_error("invalid calendar date '" + iso_date + "'");
  }
  return std::chrono::sys_days{ymd}.time_since_epoch().count();
}

std::string format_date_days(int64_t days) {
  const std::chrono::sys_days sd{std::chrono::days{days}};
  const std::chrono::year_month_day ymd{sd};
  std::array<char, 16> buf{};
  std::snprintf(buf.data(), buf.size(), "%04d-%02u-%02u",
                static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return std::string(buf.data());
}

std::string format_double(double value) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) {
    throw std::runtime_error("format_double failed");
  }
  return std::string(buf.data(), ptr);
}

double parse_double(const std::string& text, const std::string& context) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw std::runtime_error(context + ": not a finite number: '" + text + "'");
  }
  return value;
}

}  // namespace syntha1c::csv
