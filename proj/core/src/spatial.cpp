#include "patchwork/spatial.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

#include "patchwork/csv.hpp"
#include "patchwork/error.hpp"
#include "patchwork/fsutil.hpp"
#include "patchwork/parallel.hpp"
#include "patchwork/postprocess.hpp"

namespace patchwork {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<PointRecord> read_points(const fs::path& path) {
  const auto table = CsvTable::read(path);
  const auto c_id = table.require_column("id");
  const auto c_name = table.require_column("name");
  const auto c_lon = table.require_column("lon");
  const auto c_lat = table.require_column("lat");
  std::vector<PointRecord> out;
  out.reserve(table.size());
  for (const auto& row : table.rows()) {
    PointRecord p;
    p.id = row[c_id];
    p.name = row[c_name];
    try {
      p.location = geo::GeoPoint(parse_double(row[c_lon], "lon"), parse_double(row[c_lat], "lat"));
    } catch (const ConfigError& e) {
      throw DataError("point " + p.id + " in " + path.string() + ": " + e.what());
    }
    for (std::size_t c = 0; c < table.header().size(); ++c) {
      if (c == c_id || c == c_name || c == c_lon || c == c_lat) continue;
      p.attributes[table.header()[c]] = row[c];
    }
    out.push_back(std::move(p));
  }
  return out;
}

void write_points(const fs::path& path, const std::vector<PointRecord>& points) {
  std::vector<std::string> extra;
  for (const auto& p : points) {
    for (const auto& [k, v] : p.attributes) {
      if (std::find(extra.begin(), extra.end(), k) == extra.end()) extra.push_back(k);
    }
  }
  std::sort(extra.begin(), extra.end());
  atomic_write(path, [&](std::ostream& out) {
    CsvWriter w(out);
    std::vector<std::string> header = {"id", "name", "lon", "lat"};
    header.insert(header.end(), extra.begin(), extra.end());
    w.row(header);
    for (const auto& p : points) {
      std::vector<std::string> row = {p.id, p.name, format_shortest(p.location.lon()),
                                      format_shortest(p.location.lat())};
      for (const auto& k : extra) {
        auto it = p.attributes.find(k);
        row.push_back(it == p.attributes.end() ? "" : it->second);
      }
      w.row(row);
    }
  });
}

std::optional<int> parse_year(const std::string& s) {
  if (s.size() < 4) return std::nullopt;
  for (int i = 0; i < 4; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[static_cast<std::size_t>(i)]))) return std::nullopt;
  }
  if (s.size() > 4 && std::isdigit(static_cast<unsigned char>(s[4]))) return std::nullopt;
  return std::stoi(s.substr(0, 4));
}

DateFilter DateFilter::from_catalog(const std::vector<CatalogEntry>& catalog) {
  std::vector<Sheet> sheets;
  for (const auto& e : catalog) {
    auto it = e.metadata.find("survey_date");
    sheets.push_back({e.bbox, it == e.metadata.end() ? std::nullopt : parse_year(it->second)});
  }
  return DateFilter(std::move(sheets));
}

DateFilter::Verdict DateFilter::check(const PointRecord& p) const {
  auto opened_it = p.attributes.find("opened");
  const auto opened = opened_it == p.attributes.end() ? std::nullopt : parse_year(opened_it->second);
  for (const auto& s : sheets_) {
    if (!s.bbox.contains(p.location)) continue;
    if (!opened || !s.survey_year) return Verdict::KeepUndated;
    return *opened > *s.survey_year ? Verdict::Drop : Verdict::Keep;
  }
  return Verdict::KeepUndated;
}

json LinkReport::to_json() const {
  json j = {{"label", label},
            {"threshold_m", threshold_m},
            {"points", points},
            {"within", within},
            {"dropped_by_date", dropped_by_date},
            {"undated", undated}};
  j["fraction"] = fraction ? json(*fraction) : json(nullptr);
  if (!fraction) j["flag"] = "no predictions carry the label";
  json rows = json::array();
  for (const auto& e : entries) {
    rows.push_back({{"point_id", e.point_id},
                    {"distance_m", std::isfinite(e.distance_m) ? json(e.distance_m) : json(nullptr)},
                    {"within", e.within}});
  }
  j["entries"] = rows;
  return j;
}

LinkReport link_points(const std::vector<PointRecord>& points,
                       const std::vector<PredictionRecord>& predictions, int label,
                       double threshold_m, const DateFilter* date_filter) {
  if (!(threshold_m >= 0.0)) throw ConfigError("link threshold must be >= 0");
  LinkReport report;
  report.label = label;
  report.threshold_m = threshold_m;

  std::vector<geo::GeoPoint> centers;
  for (const auto& p : predictions) {
    if (p.label_id == label) centers.push_back(p.center);
  }
  std::optional<SpatialIndex> index;
  if (!centers.empty()) index.emplace(std::move(centers));

  for (const auto& pt : points) {
    if (date_filter != nullptr) {
      const auto verdict = date_filter->check(pt);
      if (verdict == DateFilter::Verdict::Drop) {
        ++report.dropped_by_date;
        continue;
      }
      if (verdict == DateFilter::Verdict::KeepUndated) ++report.undated;
    }
    LinkEntry e;
    e.point_id = pt.id;
    e.distance_m = kNoNeighbor;
    if (index) {
      if (const auto nn = index->nearest(pt.location)) e.distance_m = nn->distance_m;
    }
    e.within = e.distance_m <= threshold_m;
    report.within += e.within ? 1 : 0;
    report.entries.push_back(std::move(e));
  }
  report.points = report.entries.size();
  if (report.undated > 0) {
    spdlog::warn("{} points lacked a survey or opening date and were kept", report.undated);
  }
  if (index && report.points > 0) {
    report.fraction = static_cast<double>(report.within) / static_cast<double>(report.points);
  }
  return report;
}

QuantileBins quantile_bins(const std::vector<double>& values, int n_bins) {
  if (n_bins < 1) throw ConfigError("n_bins must be >= 1");
  if (values.empty()) throw DataError("cannot bin an empty value set");
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const auto nb = static_cast<std::size_t>(n_bins);

  QuantileBins out;
  out.edges.resize(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    const std::size_t k = (i + 1) * n / nb;
    out.edges[i] = sorted[k > 0 ? k - 1 : 0];
  }
  out.edges.back() = sorted.back();
  out.populations.assign(nb, 0);
  out.assignment.reserve(n);
  for (double v : values) {
    const auto it = std::lower_bound(out.edges.begin(), out.edges.end(), v);
    const auto bin = static_cast<int>(it - out.edges.begin());
    out.assignment.push_back(bin);
    ++out.populations[static_cast<std::size_t>(bin)];
  }
  out.degenerate = std::any_of(out.populations.begin(), out.populations.end(),
                               [](std::size_t c) { return c == 0; });
  return out;
}

json DensityResult::summary_json() const {
  return {{"subjects", subjects},
          {"emitted", records.size()},
          {"without_neighbors", without_neighbors},
          {"bin_edges", bin_edges},
          {"degenerate_bins", degenerate_bins}};
}

DensityResult neighbor_density(const std::vector<PredictionRecord>& predictions, int subject_label,
                               int target_label, double radius_m, double min_percent, int n_bins,
                               int workers) {
  if (!(radius_m > 0.0)) throw ConfigError("density radius must be positive");
  if (!(min_percent >= 0.0 && min_percent <= 100.0)) {
    throw ConfigError("min_percent must lie in [0, 100]");
  }
  DensityResult result;
  std::vector<std::size_t> usable;
  std::vector<geo::GeoPoint> centers;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i].failed()) continue;
    usable.push_back(i);
    centers.push_back(predictions[i].center);
  }
  std::vector<std::size_t> subjects;
  for (std::size_t k = 0; k < usable.size(); ++k) {
    if (predictions[usable[k]].label_id == subject_label) subjects.push_back(k);
  }
  result.subjects = subjects.size();
  if (subjects.empty()) return result;

  const SpatialIndex index(std::move(centers));
  std::vector<std::optional<DensityRecord>> slots(subjects.size());
  parallel_for(subjects.size(), workers, [&](std::size_t s) {
    const std::size_t k = subjects[s];
    DensityRecord r;
    r.patch_id = predictions[usable[k]].patch_id;
    for (auto j : index.within(index.point(k), radius_m)) {
      if (j == k) continue;
      ++r.neighbor_count;
      if (predictions[usable[j]].label_id == target_label) ++r.target_label_count;
    }
    if (r.neighbor_count > 0) {
      r.density_percent = 100.0 * static_cast<double>(r.target_label_count) /
                          static_cast<double>(r.neighbor_count);
    }
    slots[s] = r;
  });

  for (auto& s : slots) {
    if (s->neighbor_count == 0) {
      ++result.without_neighbors;
    } else if (s->density_percent >= min_percent) {
      result.records.push_back(std::move(*s));
    }
  }
  std::sort(result.records.begin(), result.records.end(),
            [](const auto& a, const auto& b) { return a.patch_id < b.patch_id; });
  if (!result.records.empty()) {
    std::vector<double> values;
    for (const auto& r : result.records) values.push_back(r.density_percent);
    const auto bins = quantile_bins(values, n_bins);
    for (std::size_t i = 0; i < result.records.size(); ++i) {
      result.records[i].quantile_bin = bins.assignment[i];
    }
    result.bin_edges = bins.edges;
    result.degenerate_bins = bins.degenerate;
  }
  return result;
}

void write_density(const fs::path& path, const std::vector<DensityRecord>& records) {
  atomic_write(path, [&](std::ostream& out) {
    CsvWriter w(out);
    w.row({"patch_id", "neighbor_count", "target_label_count", "density_percent", "quantile_bin"});
    for (const auto& r : records) {
      w.row({r.patch_id, std::to_string(r.neighbor_count), std::to_string(r.target_label_count),
             format_fixed(r.density_percent, 4), std::to_string(r.quantile_bin)});
    }
  });
}

std::vector<DensityRecord> read_density(const fs::path& path) {
  const auto table = CsvTable::read(path);
  const auto c_id = table.require_column("patch_id");
  const auto c_n = table.require_column("neighbor_count");
  const auto c_t = table.require_column("target_label_count");
  const auto c_d = table.require_column("density_percent");
  const auto c_b = table.require_column("quantile_bin");
  std::vector<DensityRecord> out;
  for (const auto& row : table.rows()) {
    DensityRecord r;
    r.patch_id = row[c_id];
    r.neighbor_count = static_cast<std::size_t>(parse_int(row[c_n], "neighbor_count"));
    r.target_label_count = static_cast<std::size_t>(parse_int(row[c_t], "target_label_count"));
    r.density_percent = parse_double(row[c_d], "density_percent");
    r.quantile_bin = static_cast<int>(parse_int(row[c_b], "quantile_bin"));
    out.push_back(std::move(r));
  }
  return out;
}

json predictions_geojson(const std::vector<Patch>& patches,
                         const std::vector<PredictionRecord>& predictions,
                         const LabelSchema* schema, const std::vector<DensityRecord>* density) {
  std::unordered_map<std::string, const Patch*> by_id;
  for (const auto& p : patches) by_id.emplace(p.patch_id, &p);
  std::unordered_map<std::string, const DensityRecord*> dens;
  if (density != nullptr) {
    for (const auto& d : *density) dens.emplace(d.patch_id, &d);
  }

  json features = json::array();
  for (const auto& pred : predictions) {
    auto it = by_id.find(pred.patch_id);
    if (it == by_id.end()) {
      throw DataError("prediction for patch " + pred.patch_id + " has no entry in the patch index");
    }
    const auto& fp = it->second->footprint;
    const double x0 = fp.min().lon(), y0 = fp.min().lat();
    const double x1 = fp.max().lon(), y1 = fp.max().lat();
    json props = {{"patch_id", pred.patch_id},
                  {"label_id", pred.label_id},
                  {"confidence", pred.confidence}};
    if (schema != nullptr && schema->contains(pred.label_id)) props["label"] = schema->name(pred.label_id);
    if (auto d = dens.find(pred.patch_id); d != dens.end()) {
      props["density_percent"] = d->second->density_percent;
      props["quantile_bin"] = d->second->quantile_bin;
    }
    features.push_back(
        {{"type", "Feature"},
         {"geometry",
          {{"type", "Polygon"},
           {"coordinates", json::array({json::array({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}})})}}},
         {"properties", props}});
  }
  return {{"type", "FeatureCollection"}, {"features", features}};
}

}  // namespace patchwork
