#include "patchwork/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "patchwork/error.hpp"
#include "patchwork/fsutil.hpp"

namespace patchwork {

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t CsvTable::require_column(std::string_view name) const {
  if (auto idx = column(name)) return *idx;
  throw DataError(origin_ + ": missing required column '" + std::string(name) + "'");
}

void CsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != header_.size()) {
    throw DataError(origin_ + ": row " + std::to_string(rows_.size() + 2) + " has " +
                    std::to_string(row.size()) + " cells, header has " +
                    std::to_string(header_.size()));
  }
  rows_.push_back(std::move(row));
}

CsvTable CsvTable::parse(std::string_view text, const std::string& origin) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string cell;
  bool in_quotes = false;
  bool cell_started = false;

  auto end_record = [&] {
    record.push_back(std::move(cell));
    cell.clear();
    // Blank lines carry no data.
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
    cell_started = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cell.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        in_quotes = true;
        cell_started = true;
        break;
      case ',':
        record.push_back(std::move(cell));
        cell.clear();
        cell_started = true;
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        break;
      default:
        cell.push_back(ch);
        cell_started = true;
    }
  }
  if (in_quotes) throw DataError(origin + ": unterminated quoted field");
  if (cell_started || !cell.empty() || !record.empty()) end_record();

  if (records.empty()) throw DataError(origin + ": missing header row");
  CsvTable table(std::move(records.front()));
  table.origin_ = origin;
  for (std::size_t i = 1; i < records.size(); ++i) table.add_row(std::move(records[i]));
  return table;
}

CsvTable CsvTable::read(const std::filesystem::path& path) {
  return parse(read_file_text(path), path.string());
}

std::string csv_escape(std::string_view cell) {
  if (cell.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(cell);
  std::string out = "\"";
  for (char ch : cell) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) out_ << ',';
    out_ << csv_escape(cells[i]);
  }
  out_ << '\n';
}

std::string format_fixed(double v, int digits) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s(buf);
  // Avoid "-0.000" for tiny negatives.
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string format_shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

double parse_double(const std::string& s, std::string_view what) {
  if (s == "inf") return INFINITY;
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw DataError("invalid number for " + std::string(what) + ": '" + s + "'");
  }
  return v;
}

long long parse_int(const std::string& s, std::string_view what) {
  long long v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw DataError("invalid integer for " + std::string(what) + ": '" + s + "'");
  }
  return v;
}

}  // namespace patchwork
