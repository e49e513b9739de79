#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace patchwork {

/// Header + rows of an RFC 4180 CSV file. Every row has header().size() cells.
class CsvTable {
 public:
  CsvTable() = default;
  explicit CsvTable(std::vector<std::string> header);

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

  std::optional<std::size_t> column(std::string_view name) const;
  /// Like column() but throws DataError naming the file context when absent.
  std::size_t require_column(std::string_view name) const;

  void add_row(std::vector<std::string> row);

  static CsvTable parse(std::string_view text, const std::string& origin = "<memory>");
  static CsvTable read(const std::filesystem::path& path);

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  std::string origin_;
};

/// Streaming writer; quotes cells only when needed.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}
  void row(const std::vector<std::string>& cells);

 private:
  std::ostream& out_;
};

std::string csv_escape(std::string_view cell);

/// Fixed-precision decimal formatting used by every CSV artifact.
std::string format_fixed(double v, int digits);

/// Shortest representation that parses back to the identical double.
std::string format_shortest(double v);

double parse_double(const std::string& s, std::string_view what);
long long parse_int(const std::string& s, std::string_view what);

}  // namespace patchwork
