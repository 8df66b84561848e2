#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace synthloc {

// "%.<digits>g"
std::string FormatSig(double value, int digits);
// "%.<decimals>f"
std::string FormatFixed(double value, int decimals);

// Comma-separated table with a mandatory header line. Fields never contain
// commas or quotes.
struct CsvTable {
  std::filesystem::path source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column position by name; throws kData when absent.
  int Column(std::string_view name) const;
  // Typed field access; parse failures throw kData naming file and line.
  double Double(size_t row, int column) const;
  int Int(size_t row, int column) const;
};

// Throws kData for missing files, a missing header or ragged rows.
CsvTable ReadCsv(const std::filesystem::path& path);

// Writes header and rows with '\n' line endings, creating parent directories.
void WriteCsv(const std::filesystem::path& path, const std::vector<std::string>& header,
              const std::vector<std::vector<std::string>>& rows);

// Throws kData when `path` is not a regular file.
void RequireFile(const std::filesystem::path& path);

}  // namespace synthloc
