#include "facesync/csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>

#include "facesync/error.hpp"

namespace facesync {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && (s.front() == '\'' || s.front() == '"') && s.back() == s.front())
    s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

CsvTable CsvTable::read(std::istream& is, std::string source_name) {
  CsvTable t;
  t.source_ = std::move(source_name);
  std::string line;
  if (!std::getline(is, line)) throw DataError(t.source_ + ": empty file, expected a header");
  const char delim =
      (line.find(';') != std::string::npos && line.find(',') == std::string::npos) ? ';' : ',';
  t.header_ = split(line, delim);
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    auto row = split(line, delim);
    if (row.size() != t.header_.size())
      throw DataError(t.source_ + ": row " + std::to_string(t.cells_.size()) + " has " +
                      std::to_string(row.size()) + " cells, header has " +
                      std::to_string(t.header_.size()));
    t.cells_.push_back(std::move(row));
  }
  return t;
}

CsvTable CsvTable::read_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  return read(is, path.string());
}

std::optional<std::size_t> CsvTable::find_column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i)
    if (header_[i] == name) return i;
  return std::nullopt;
}

std::size_t CsvTable::column(std::string_view name) const {
  if (auto c = find_column(name)) return *c;
  throw DataError(source_ + ": missing column " + std::string(name));
}

const std::string& CsvTable::cell(std::size_t row, std::size_t col) const {
  return cells_.at(row).at(col);
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  const auto& c = cell(row, col);
  if (auto v = parse_double(c)) return *v;
  throw DataError(source_ + ": unparseable number '" + c + "' at row " + std::to_string(row) +
                  ", column " + header_[col]);
}

}  // namespace facesync
