#include "patchwork/patchify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <thread>

#include "patchwork/csv.hpp"
#include "patchwork/error.hpp"
#include "patchwork/fsutil.hpp"

namespace patchwork {

using geo::GeoBBox;
using geo::GeoPoint;

namespace {

const std::vector<std::string> kIndexHeader = {
    "patch_id", "sheet_id", "x0",         "y0",         "w",    "h",   "min_lon", "min_lat",
    "max_lon",  "max_lat",  "center_lon", "center_lat", "mean", "std", "partial"};

}  // namespace

void SliceSpec::validate() const {
  if (!(size > 0.0) || !std::isfinite(size)) throw ConfigError("slice size must be positive");
}

std::string make_patch_id(const std::string& sheet_id, int row, int col) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "-r%04d-c%04d", row, col);
  return sheet_id + buf;
}

std::pair<int, int> parse_grid_position(const std::string& patch_id) {
  const auto c_pos = patch_id.rfind("-c");
  const auto r_pos = c_pos == std::string::npos ? std::string::npos : patch_id.rfind("-r", c_pos);
  if (r_pos == std::string::npos) throw DataError("malformed patch id: " + patch_id);
  const auto row = parse_int(patch_id.substr(r_pos + 2, c_pos - r_pos - 2), "patch row");
  const auto col = parse_int(patch_id.substr(c_pos + 2), "patch col");
  return {static_cast<int>(row), static_cast<int>(col)};
}

std::pair<double, double> meters_per_pixel(const MapSheet& sheet) {
  const GeoBBox& b = sheet.bbox;
  if (b.width_deg() <= 0.0 || b.height_deg() <= 0.0) {
    throw DataError("sheet '" + sheet.sheet_id + "' has a zero-extent bbox");
  }
  if (sheet.image.empty()) throw DataError("sheet '" + sheet.sheet_id + "' has no pixels");
  const double mid_lat = (b.min().lat() + b.max().lat()) / 2.0;
  const double mid_lon = (b.min().lon() + b.max().lon()) / 2.0;
  const double width_m = geo::geo_distance_m({b.min().lon(), mid_lat}, {b.max().lon(), mid_lat});
  const double height_m = geo::geo_distance_m({mid_lon, b.min().lat()}, {mid_lon, b.max().lat()});
  return {width_m / sheet.image.cols(), height_m / sheet.image.rows()};
}

int patch_side_px(const MapSheet& sheet, const SliceSpec& spec) {
  spec.validate();
  if (spec.mode == SliceMode::Pixels) return std::max(1, static_cast<int>(std::lround(spec.size)));
  const auto [mx, my] = meters_per_pixel(sheet);
  (void)my;
  return std::max(1, static_cast<int>(std::lround(spec.size / mx)));
}

PatchStats patch_stats(const Raster& image, const PixelRect& rect) {
  const double n = static_cast<double>(rect.w) * rect.h;
  double sum = 0.0;
  for (int r = rect.y0; r < rect.y0 + rect.h; ++r) {
    for (int c = rect.x0; c < rect.x0 + rect.w; ++c) sum += gray_intensity(image, r, c);
  }
  const double mean = sum / n;
  double sq = 0.0;
  for (int r = rect.y0; r < rect.y0 + rect.h; ++r) {
    for (int c = rect.x0; c < rect.x0 + rect.w; ++c) {
      const double d = gray_intensity(image, r, c) - mean;
      sq += d * d;
    }
  }
  return {mean, std::sqrt(sq / n)};
}

std::vector<Patch> slice(const MapSheet& sheet, const SliceSpec& spec) {
  const int side = patch_side_px(sheet, spec);
  const int cols = sheet.image.cols();
  const int rows = sheet.image.rows();
  const int full_x = cols / side;
  const int full_y = rows / side;
  const int grid_x = spec.keep_partial ? (cols + side - 1) / side : full_x;
  const int grid_y = spec.keep_partial ? (rows + side - 1) / side : full_y;
  if (grid_x == 0 || grid_y == 0) {
    throw DataError("patch side " + std::to_string(side) + " px exceeds sheet '" +
                    sheet.sheet_id + "' (" + std::to_string(cols) + "x" + std::to_string(rows) +
                    ") and keep_partial is off");
  }

  const GeoBBox& b = sheet.bbox;
  const double dlon = b.width_deg() / cols;
  const double dlat = b.height_deg() / rows;

  std::vector<Patch> out;
  out.reserve(static_cast<std::size_t>(grid_x) * grid_y);
  for (int gy = 0; gy < grid_y; ++gy) {
    for (int gx = 0; gx < grid_x; ++gx) {
      Patch p;
      p.sheet_id = sheet.sheet_id;
      p.row = gy;
      p.col = gx;
      p.patch_id = make_patch_id(sheet.sheet_id, gy, gx);
      p.rect = {gx * side, gy * side, std::min(side, cols - gx * side),
                std::min(side, rows - gy * side)};
      p.partial = p.rect.w < side || p.rect.h < side;
      const double lon0 = b.min().lon() + dlon * p.rect.x0;
      const double lon1 = b.min().lon() + dlon * (p.rect.x0 + p.rect.w);
      const double lat1 = b.max().lat() - dlat * p.rect.y0;
      const double lat0 = b.max().lat() - dlat * (p.rect.y0 + p.rect.h);
      p.footprint = GeoBBox{GeoPoint{lon0, lat0}, GeoPoint{lon1, lat1}};
      p.center = p.footprint.center();
      const auto stats = patch_stats(sheet.image, p.rect);
      p.mean = stats.mean;
      p.std = stats.std;
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<Patch> slice_catalog(const std::vector<CatalogEntry>& catalog, const SliceSpec& spec,
                                 int workers) {
  std::vector<const CatalogEntry*> order;
  for (const auto& e : catalog) order.push_back(&e);
  std::sort(order.begin(), order.end(),
            [](auto* a, auto* b) { return a->sheet_id < b->sheet_id; });

  std::vector<std::vector<Patch>> per_sheet(order.size());
  std::vector<std::exception_ptr> errors(order.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < order.size(); i = next++) {
      try {
        per_sheet[i] = slice(load_catalog_sheet(*order[i]), spec);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    const auto n = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1,
                                           std::max<std::size_t>(order.size(), 1));
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < n; ++w) pool.emplace_back(worker);
    worker();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<Patch> out;
  for (auto& v : per_sheet) {
    std::move(v.begin(), v.end(), std::back_inserter(out));
  }
  return out;
}

void write_patch_index(const std::filesystem::path& path, const std::vector<Patch>& patches) {
  atomic_write(path, [&](std::ostream& out) {
    CsvWriter w(out);
    w.row(kIndexHeader);
    for (const auto& p : patches) {
      w.row({p.patch_id, p.sheet_id, std::to_string(p.rect.x0), std::to_string(p.rect.y0),
             std::to_string(p.rect.w), std::to_string(p.rect.h),
             format_shortest(p.footprint.min().lon()), format_shortest(p.footprint.min().lat()),
             format_shortest(p.footprint.max().lon()), format_shortest(p.footprint.max().lat()),
             format_shortest(p.center.lon()), format_shortest(p.center.lat()),
             format_fixed(p.mean, 6), format_fixed(p.std, 6), p.partial ? "1" : "0"});
    }
  });
}

std::vector<Patch> read_patch_index(const std::filesystem::path& path) {
  const CsvTable t = CsvTable::read(path);
  std::vector<std::size_t> idx;
  for (const auto& name : kIndexHeader) idx.push_back(t.require_column(name));

  std::vector<Patch> out;
  out.reserve(t.size());
  for (const auto& row : t.rows()) {
    auto cell = [&](int i) -> const std::string& { return row[idx[static_cast<std::size_t>(i)]]; };
    auto num = [&](int i) { return parse_double(cell(i), kIndexHeader[static_cast<std::size_t>(i)]); };
    auto integer = [&](int i) {
      return static_cast<int>(parse_int(cell(i), kIndexHeader[static_cast<std::size_t>(i)]));
    };
    Patch p;
    p.patch_id = cell(0);
    p.sheet_id = cell(1);
    std::tie(p.row, p.col) = parse_grid_position(p.patch_id);
    p.rect = {integer(2), integer(3), integer(4), integer(5)};
    p.footprint = GeoBBox{GeoPoint{num(6), num(7)}, GeoPoint{num(8), num(9)}};
    p.center = GeoPoint{num(10), num(11)};
    p.mean = num(12);
    p.std = num(13);
    p.partial = cell(14) == "1" || cell(14) == "true";
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace patchwork
