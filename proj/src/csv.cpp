#include "widthlab/csv.hpp"

#include "widthlab/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace widthlab {

std::string format_csv_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", value);
  return buf;
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  throw DataFormatError("csv: missing column '" + name + "'");
}

namespace {

void check_field(const std::string& field) {
  if (field.find_first_of(",\"\n\r") != std::string::npos) {
    throw DataFormatError("csv: field contains a delimiter or quote: '" + field + "'");
  }
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

}  // namespace

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  if (header.empty()) throw DataFormatError("csv: header must be nonempty");
  std::ostringstream out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    check_field(header[i]);
    if (i > 0) out << ',';
    out << header[i];
  }
  out << '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size()) {
      throw DataFormatError("csv: row width differs from header in " + path.string());
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
      check_field(row[i]);
      if (i > 0) out << ',';
      out << row[i];
    }
    out << '\n';
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("csv: cannot open for writing: " + path.string());
  file << out.str();
  if (!file) throw std::runtime_error("csv: write failed: " + path.string());
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw DataFormatError("csv: cannot open: " + path.string());
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(file, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first) {
      table.header = split_line(line);
      first = false;
      continue;
    }
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != table.header.size()) {
      throw DataFormatError("csv: ragged row in " + path.string());
    }
    table.rows.push_back(std::move(fields));
  }
  if (first || table.header.empty()) {
    throw DataFormatError("csv: empty file: " + path.string());
  }
  return table;
}

double csv_to_double(const std::string& cell, const std::string& column_name) {
  try {
    std::size_t consumed = 0;
    const double value = std::stod(cell, &consumed);
    if (consumed != cell.size()) throw std::invalid_argument("trailing junk");
    return value;
  } catch (const std::exception&) {
    throw DataFormatError("csv: column '" + column_name + "' holds non-numeric cell '" + cell + "'");
  }
}

}  // namespace widthlab
