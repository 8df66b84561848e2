#include "synthloc/csv.h"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "synthloc/error.h"

namespace synthloc {
namespace {

std::vector<std::string> SplitLine(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

[[noreturn]] void BadField(const CsvTable& table, size_t row, int column,
                           const std::string& what) {
  throw Error(ErrorCode::kData, table.source.string() + ":" + std::to_string(row + 2) +
                                    ": column '" + table.header[column] + "' is not " + what);
}

}  // namespace

std::string FormatSig(double value, int digits) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*g", digits, value);
  return buffer;
}

std::string FormatFixed(double value, int decimals) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", decimals, value);
  return buffer;
}

int CsvTable::Column(std::string_view name) const {
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  throw Error(ErrorCode::kData,
              source.string() + ": missing column '" + std::string(name) + "'");
}

double CsvTable::Double(size_t row, int column) const {
  const std::string& text = rows.at(row).at(column);
  double value = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) BadField(*this, row, column, "a number");
  return value;
}

int CsvTable::Int(size_t row, int column) const {
  const std::string& text = rows.at(row).at(column);
  int value = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    BadField(*this, row, column, "an integer");
  }
  return value;
}

CsvTable ReadCsv(const std::filesystem::path& path) {
  RequireFile(path);
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kData, "cannot open " + path.string());
  CsvTable table;
  table.source = path;
  std::string line;
  if (!std::getline(in, line) || line.empty()) {
    throw Error(ErrorCode::kData, path.string() + ": missing header line");
  }
  table.header = SplitLine(line);
  size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    auto fields = SplitLine(line);
    if (fields.size() != table.header.size()) {
      throw Error(ErrorCode::kData, path.string() + ":" + std::to_string(line_number) +
                                        ": expected " + std::to_string(table.header.size()) +
                                        " fields, found " + std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  return table;
}

void WriteCsv(const std::filesystem::path& path, const std::vector<std::string>& header,
              const std::vector<std::vector<std::string>>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kData, "cannot write " + path.string());
  auto write_line = [&out](const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
      if (i > 0) out << ',';
      out << fields[i];
    }
    out << '\n';
  };
  write_line(header);
  for (const auto& row : rows) write_line(row);
  if (!out) throw Error(ErrorCode::kData, "failed writing " + path.string());
}

void RequireFile(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(ErrorCode::kData, "missing file " + path.string());
  }
}

}  // namespace synthloc
