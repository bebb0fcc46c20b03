// Minimal CSV interchange between the sweep, fit, and report stages. Files
// are plain comma-separated UTF-8 with a header row; fields never contain
// commas, quotes, or newlines, so no quoting dialect is needed.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace widthlab {

// Shortest round-trip-ish decimal ("%.12g"), shared by every CSV emitter so
// reruns are byte-identical.
std::string format_csv_number(double value);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws DataFormatError if absent.
  int column(const std::string& name) const;
};

// Writes header + rows; throws std::runtime_error on I/O failure and
// DataFormatError if any row width disagrees with the header.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Reads a file written by write_csv; throws DataFormatError on missing file,
// empty content, or ragged rows.
CsvTable read_csv(const std::filesystem::path& path);

// Parses a numeric cell; throws DataFormatError naming the column on failure.
double csv_to_double(const std::string& cell, const std::string& column_name);

}  // namespace widthlab
