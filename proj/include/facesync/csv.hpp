#pragma once

// Minimal delimited-text table used by every file format in the toolkit.
// Delimiter is ',' unless the header line contains ';' and no ','.
// Cells are whitespace-trimmed; surrounding single or double quotes are dropped.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace facesync {

class CsvTable {
 public:
  static CsvTable read(std::istream& is, std::string source_name);
  static CsvTable read_file(const std::filesystem::path& path);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return cells_.size(); }
  const std::string& source() const { return source_; }

  std::optional<std::size_t> find_column(std::string_view name) const;
  /// Throws DataError "missing column <name>" when absent.
  std::size_t column(std::string_view name) const;

  const std::string& cell(std::size_t row, std::size_t col) const;
  /// Parses a numeric cell; errors name the file, data row index and column.
  double number(std::size_t row, std::size_t col) const;

 private:
  std::string source_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> cells_;
};

std::optional<double> parse_double(std::string_view s);

}  // namespace facesync
