#include "patchwork/predictions.hpp"

#include "patchwork/csv.hpp"
#include "patchwork/fsutil.hpp"

namespace patchwork {

void write_predictions(const std::filesystem::path& path,
                       const std::vector<PredictionRecord>& records) {
  atomic_write(path, [&](std::ostream& out) {
    CsvWriter w(out);
    w.row({"patch_id", "label_id", "confidence", "center_lon", "center_lat"});
    for (const auto& r : records) {
      w.row({r.patch_id, std::to_string(r.label_id), format_fixed(r.confidence, 6),
             format_shortest(r.center.lon()), format_shortest(r.center.lat())});
    }
  });
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  const CsvTable t = CsvTable::read(path);
  const auto id = t.require_column("patch_id");
  const auto label = t.require_column("label_id");
  const auto conf = t.require_column("confidence");
  const auto lon = t.require_column("center_lon");
  const auto lat = t.require_column("center_lat");
  std::vector<PredictionRecord> out;
  out.reserve(t.size());
  for (const auto& row : t.rows()) {
    out.push_back({row[id], static_cast<int>(parse_int(row[label], "label_id")),
                   parse_double(row[conf], "confidence"),
                   geo::GeoPoint{parse_double(row[lon], "center_lon"),
                                 parse_double(row[lat], "center_lat")}});
  }
  return out;
}

}  // namespace patchwork
