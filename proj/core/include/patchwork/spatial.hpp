#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "patchwork/annotation.hpp"
#include "patchwork/geo.hpp"
#include "patchwork/ingest.hpp"
#include "patchwork/patchify.hpp"
#include "patchwork/predictions.hpp"

namespace patchwork {

struct PointRecord {
  std::string id;
  std::string name;
  geo::GeoPoint location;
  /// Every other column, including `opened` and `closed` when present.
  std::map<std::string, std::string> attributes;
};

/// CSV with id, name, lon, lat and optional opened, closed, ... columns.
std::vector<PointRecord> read_points(const std::filesystem::path& path);
void write_points(const std::filesystem::path& path, const std::vector<PointRecord>& points);

/// Leading four-digit year of a date string such as "1895" or "1895-06-01".
std::optional<int> parse_year(const std::string& s);

/// Drops points opened after the survey of the sheet that covers them.
/// Points without a covering dated sheet or without an opening date pass.
class DateFilter {
 public:
  struct Sheet {
    geo::GeoBBox bbox;
    std::optional<int> survey_year;
  };

  DateFilter() = default;
  explicit DateFilter(std::vector<Sheet> sheets) : sheets_(std::move(sheets)) {}
  /// Uses each entry's `survey_date` metadata.
  static DateFilter from_catalog(const std::vector<CatalogEntry>& catalog);

  enum class Verdict { Keep, Drop, KeepUndated };
  Verdict check(const PointRecord& p) const;

 private:
  std::vector<Sheet> sheets_;
};

struct LinkEntry {
  std::string point_id;
  double distance_m = 0.0;  // +inf when no patch has the label
  bool within = false;
};

struct LinkReport {
  int label = 0;
  double threshold_m = 150.0;
  std::size_t points = 0;
  std::size_t within = 0;
  /// Unset when no prediction carries the label.
  std::optional<double> fraction;
  std::size_t dropped_by_date = 0;
  std::size_t undated = 0;
  std::vector<LinkEntry> entries;

  nlohmann::json to_json() const;
};

LinkReport link_points(const std::vector<PointRecord>& points,
                       const std::vector<PredictionRecord>& predictions, int label,
                       double threshold_m = 150.0, const DateFilter* date_filter = nullptr);

struct DensityRecord {
  std::string patch_id;
  std::size_t neighbor_count = 0;
  std::size_t target_label_count = 0;
  double density_percent = 0.0;
  int quantile_bin = 0;
};

struct DensityResult {
  std::vector<DensityRecord> records;  // sorted by patch_id
  std::size_t subjects = 0;
  std::size_t without_neighbors = 0;
  std::vector<double> bin_edges;
  bool degenerate_bins = false;

  nlohmann::json summary_json() const;
};

/// For each subject-label patch, the share of target-label patches among all
/// other predictions within radius_m. Records below min_percent are dropped;
/// the rest are assigned to n_bins quantile bins.
DensityResult neighbor_density(const std::vector<PredictionRecord>& predictions, int subject_label,
                               int target_label, double radius_m = 500.0,
                               double min_percent = 20.0, int n_bins = 7, int workers = 1);

void write_density(const std::filesystem::path& path, const std::vector<DensityRecord>& records);
std::vector<DensityRecord> read_density(const std::filesystem::path& path);

struct QuantileBins {
  /// Upper (inclusive) edge of each bin.
  std::vector<double> edges;
  std::vector<int> assignment;
  std::vector<std::size_t> populations;
  /// True when ties left some bin empty.
  bool degenerate = false;
};

/// Upper edge of bin i is the sorted value at floor((i + 1) N / n_bins) - 1;
/// a value goes to the first bin whose edge is >= it, so ties fall low.
QuantileBins quantile_bins(const std::vector<double>& values, int n_bins);

/// FeatureCollection of patch footprints with label, confidence and, when
/// given, density and bin properties.
nlohmann::json predictions_geojson(const std::vector<Patch>& patches,
                                   const std::vector<PredictionRecord>& predictions,
                                   const LabelSchema* schema = nullptr,
                                   const std::vector<DensityRecord>* density = nullptr);

}  // namespace patchwork
