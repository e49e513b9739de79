#include "patchwork/ingest.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <set>
#include <thread>

#include "patchwork/csv.hpp"
#include "patchwork/error.hpp"
#include "patchwork/fsutil.hpp"
#include "patchwork/raster_io.hpp"

namespace patchwork {

namespace fs = std::filesystem;
using geo::GeoBBox;
using geo::GeoPoint;
using geo::TileCoord;

namespace {

constexpr const char* kPlaceholders[] = {"{z}", "{x}", "{y}"};

std::size_t count_occurrences(const std::string& haystack, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

void replace_once(std::string& s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  s.replace(pos, from.size(), to);
}

const std::vector<std::string> kBboxColumns = {"min_lon", "min_lat", "max_lon", "max_lat"};

std::optional<GeoBBox> bbox_from_metadata(const SheetMetadata& md) {
  for (const auto& key : kBboxColumns) {
    auto it = md.find(key);
    if (it == md.end() || it->second.empty()) return std::nullopt;
  }
  return GeoBBox{GeoPoint{parse_double(md.at("min_lon"), "min_lon"),
                          parse_double(md.at("min_lat"), "min_lat")},
                 GeoPoint{parse_double(md.at("max_lon"), "max_lon"),
                          parse_double(md.at("max_lat"), "max_lat")}};
}

}  // namespace

void TileSource::validate() const {
  for (const char* ph : kPlaceholders) {
    const auto n = count_occurrences(url_template, ph);
    if (n != 1) {
      throw ConfigError("tile url template must contain " + std::string(ph) +
                        " exactly once (found " + std::to_string(n) + "): " + url_template);
    }
  }
  if (max_zoom < 0 || max_zoom > geo::kMaxZoom) throw ConfigError("tile max_zoom out of range");
  if (request_delay_ms < 0) throw ConfigError("request_delay_ms must be >= 0");
  if (retries < 0) throw ConfigError("retries must be >= 0");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (tile_px < 1) throw ConfigError("tile_px must be >= 1");
  if (cache_dir.empty()) throw ConfigError("tile cache_dir is mandatory");
}

TileSource TileSource::from_json(const nlohmann::json& j) {
  TileSource s;
  s.url_template = j.at("url_template").get<std::string>();
  s.max_zoom = j.value("max_zoom", s.max_zoom);
  s.request_delay_ms = j.value("request_delay_ms", s.request_delay_ms);
  s.cache_dir = j.value("cache_dir", std::string{});
  s.retries = j.value("retries", s.retries);
  s.workers = j.value("workers", s.workers);
  s.tile_px = j.value("tile_px", s.tile_px);
  return s;
}

nlohmann::json TileSource::to_json() const {
  return {{"url_template", url_template}, {"max_zoom", max_zoom},
          {"request_delay_ms", request_delay_ms}, {"cache_dir", cache_dir.string()},
          {"retries", retries}, {"workers", workers}, {"tile_px", tile_px}};
}

std::string fill_template(const TileSource& src, const TileCoord& t) {
  src.validate();
  std::string url = src.url_template;
  replace_once(url, "{z}", std::to_string(t.z()));
  replace_once(url, "{x}", std::to_string(t.x()));
  replace_once(url, "{y}", std::to_string(t.y()));
  return url;
}

HttpTransport::HttpTransport(int timeout_s) : timeout_s_(timeout_s) {}

std::string HttpTransport::get(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::runtime_error("malformed url: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string origin = url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(origin);
  client.set_connection_timeout(timeout_s_, 0);
  client.set_read_timeout(timeout_s_, 0);
  client.set_follow_location(true);
  auto res = client.Get(path);
  if (!res) {
    throw std::runtime_error("request to " + url + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw std::runtime_error("request to " + url + " returned HTTP " +
                             std::to_string(res->status));
  }
  return res->body;
}

TileFetcher::TileFetcher(TileSource source, std::shared_ptr<TileTransport> transport)
    : source_(std::move(source)), transport_(std::move(transport)) {
  source_.validate();
  if (!transport_) throw ConfigError("tile fetcher needs a transport");
}

fs::path TileFetcher::cache_path(const TileCoord& t) const {
  return source_.cache_dir / std::to_string(t.z()) / std::to_string(t.x()) /
         (std::to_string(t.y()) + ".tile");
}

std::mutex& TileFetcher::key_mutex(const TileCoord& t) {
  std::lock_guard lock(table_mutex_);
  auto& slot = key_mutexes_[t];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::string TileFetcher::fetch_tile(const TileCoord& t) {
  if (t.z() > source_.max_zoom) {
    throw ConfigError("zoom " + std::to_string(t.z()) + " exceeds tile source max_zoom " +
                      std::to_string(source_.max_zoom));
  }
  std::lock_guard key_lock(key_mutex(t));
  const fs::path cached = cache_path(t);
  if (fs::exists(cached)) return read_file_text(cached);

  const std::string url = fill_template(source_, t);
  std::string last_error;
  for (int attempt = 0; attempt <= source_.retries; ++attempt) {
    if (source_.request_delay_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(source_.request_delay_ms));
    }
    try {
      ++network_requests_;
      std::string body = transport_->get(url);
      atomic_write_text(cached, body);
      return body;
    } catch (const std::exception& e) {
      last_error = e.what();
      spdlog::warn("tile {}/{}/{} attempt {} failed: {}", t.z(), t.x(), t.y(), attempt + 1,
                   last_error);
    }
  }
  throw TileFetchError(t, "tile " + std::to_string(t.z()) + "/" + std::to_string(t.x()) + "/" +
                              std::to_string(t.y()) + " failed after " +
                              std::to_string(source_.retries + 1) + " attempts: " + last_error);
}

Raster TileFetcher::fetch_tile_raster(const TileCoord& t) {
  const std::string bytes = fetch_tile(t);
  try {
    return decode_png({reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()});
  } catch (const DataError& e) {
    throw TileFetchError(t, std::string("undecodable tile: ") + e.what());
  }
}

MapSheet TileFetcher::fetch_sheet(const GeoBBox& bbox, int z, const std::string& sheet_id) {
  const auto tiles = bbox_to_tiles(bbox, z);
  const auto& first = tiles.front();
  const auto& last = tiles.back();
  const auto tiles_x = static_cast<int>(last.x() - first.x() + 1);
  const auto tiles_y = static_cast<int>(last.y() - first.y() + 1);

  std::vector<Raster> rasters(tiles.size());
  std::vector<std::exception_ptr> errors(tiles.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tiles.size(); i = next++) {
      try {
        rasters[i] = fetch_tile_raster(tiles[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(source_.workers),
                                                 tiles.size());
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
  }
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }

  const int px = source_.tile_px;
  int channels = 1;
  for (const auto& r : rasters) {
    if (r.rows() != px || r.cols() != px) {
      throw DataError("tile size " + std::to_string(r.cols()) + "x" + std::to_string(r.rows()) +
                      " does not match tile_px " + std::to_string(px));
    }
    channels = std::max(channels, r.channels());
  }

  // Tiles are mosaicked in row-major order, single-threaded.
  Raster mosaic(tiles_y * px, tiles_x * px, channels);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    Raster tile = rasters[i];
    if (tile.channels() != channels) {
      Raster rgb(px, px, 3);
      for (int r = 0; r < px; ++r) {
        for (int c = 0; c < px; ++c) {
          for (int ch = 0; ch < 3; ++ch) rgb.at(r, c, ch) = tile.at(r, c);
        }
      }
      tile = std::move(rgb);
    }
    mosaic.paste(tile, static_cast<int>(tiles[i].x() - first.x()) * px,
                 static_cast<int>(tiles[i].y() - first.y()) * px);
  }

  const GeoBBox nw = tile_to_bbox(first);
  const GeoBBox se = tile_to_bbox(last);
  MapSheet sheet;
  sheet.sheet_id = sheet_id;
  sheet.image = std::move(mosaic);
  sheet.bbox = GeoBBox{GeoPoint{nw.min().lon(), se.min().lat()},
                       GeoPoint{se.max().lon(), nw.max().lat()}};
  sheet.metadata["zoom"] = std::to_string(z);
  return sheet;
}

std::map<std::string, SheetMetadata> load_metadata(const fs::path& path) {
  const CsvTable table = CsvTable::read(path);
  const std::size_t id_col = table.require_column("sheet_id");

  std::map<std::string, SheetMetadata> out;
  std::set<std::string> duplicates;
  for (const auto& row : table.rows()) {
    SheetMetadata md;
    for (std::size_t i = 0; i < row.size(); ++i) md[table.header()[i]] = row[i];
    if (!out.emplace(row[id_col], std::move(md)).second) duplicates.insert(row[id_col]);
  }
  if (!duplicates.empty()) {
    std::string list;
    for (const auto& d : duplicates) list += (list.empty() ? "" : ", ") + d;
    throw DataError(path.string() + ": duplicate sheet_id values: " + list);
  }
  return out;
}

MapSheet load_local(const fs::path& path, const std::string& sheet_id,
                    std::optional<GeoBBox> bbox, SheetMetadata metadata) {
  if (!fs::exists(path)) throw DataError("sheet image not found: " + path.string());
  if (!bbox) bbox = bbox_from_metadata(metadata);
  if (!bbox) {
    throw DataError("no georeference for sheet '" + sheet_id +
                    "': supply a bbox or min_lon/min_lat/max_lon/max_lat metadata");
  }
  MapSheet sheet;
  sheet.sheet_id = sheet_id;
  sheet.image = read_raster(path);
  sheet.bbox = *bbox;
  sheet.metadata = std::move(metadata);
  return sheet;
}

MapSheet crop_to_bbox(const MapSheet& sheet, const GeoBBox& bbox) {
  const double w = sheet.bbox.width_deg();
  const double h = sheet.bbox.height_deg();
  if (w <= 0.0 || h <= 0.0) throw DataError("sheet '" + sheet.sheet_id + "' has a degenerate bbox");
  const int cols = sheet.image.cols();
  const int rows = sheet.image.rows();
  auto col_of = [&](double lon) { return (lon - sheet.bbox.min().lon()) / w * cols; };
  auto row_of = [&](double lat) { return (sheet.bbox.max().lat() - lat) / h * rows; };

  const int x0 = std::clamp(static_cast<int>(std::floor(col_of(bbox.min().lon()))), 0, cols - 1);
  const int x1 = std::clamp(static_cast<int>(std::ceil(col_of(bbox.max().lon()))), x0 + 1, cols);
  const int y0 = std::clamp(static_cast<int>(std::floor(row_of(bbox.max().lat()))), 0, rows - 1);
  const int y1 = std::clamp(static_cast<int>(std::ceil(row_of(bbox.min().lat()))), y0 + 1, rows);

  MapSheet out;
  out.sheet_id = sheet.sheet_id;
  out.metadata = sheet.metadata;
  out.image = sheet.image.crop({x0, y0, x1 - x0, y1 - y0});
  const double lon0 = sheet.bbox.min().lon() + w * x0 / cols;
  const double lon1 = sheet.bbox.min().lon() + w * x1 / cols;
  const double lat1 = sheet.bbox.max().lat() - h * y0 / rows;
  const double lat0 = sheet.bbox.max().lat() - h * y1 / rows;
  out.bbox = GeoBBox{GeoPoint{lon0, lat0}, GeoPoint{lon1, lat1}};
  return out;
}

std::vector<CatalogEntry> read_catalog(const fs::path& path) {
  const auto records = load_metadata(path);
  const fs::path base = path.parent_path();
  std::vector<CatalogEntry> out;
  out.reserve(records.size());
  for (const auto& [id, md] : records) {
    auto it = md.find("path");
    if (it == md.end() || it->second.empty()) {
      throw DataError(path.string() + ": sheet '" + id + "' has no path");
    }
    auto bbox = bbox_from_metadata(md);
    if (!bbox) throw DataError(path.string() + ": sheet '" + id + "' has no georeference");
    CatalogEntry e;
    e.sheet_id = id;
    e.path = fs::path(it->second).is_absolute() ? fs::path(it->second) : base / it->second;
    e.bbox = *bbox;
    for (const auto& [k, v] : md) {
      if (k == "sheet_id" || k == "path" ||
          std::find(kBboxColumns.begin(), kBboxColumns.end(), k) != kBboxColumns.end()) {
        continue;
      }
      e.metadata[k] = v;
    }
    out.push_back(std::move(e));
  }
  return out;
}

void write_catalog(const fs::path& path, const std::vector<CatalogEntry>& entries) {
  std::set<std::string> extra;
  for (const auto& e : entries) {
    for (const auto& [k, v] : e.metadata) extra.insert(k);
  }
  std::vector<std::string> header = {"sheet_id", "path", "min_lon", "min_lat", "max_lon",
                                     "max_lat"};
  header.insert(header.end(), extra.begin(), extra.end());

  const fs::path base = path.parent_path();
  atomic_write(path, [&](std::ostream& out) {
    CsvWriter w(out);
    w.row(header);
    for (const auto& e : entries) {
      std::vector<std::string> row = {
          e.sheet_id,
          e.path.is_absolute() && !base.empty() ? fs::relative(e.path, base).string()
                                                 : e.path.string(),
          format_shortest(e.bbox.min().lon()),
          format_shortest(e.bbox.min().lat()),
          format_shortest(e.bbox.max().lon()),
          format_shortest(e.bbox.max().lat())};
      for (const auto& k : extra) {
        auto it = e.metadata.find(k);
        row.push_back(it == e.metadata.end() ? "" : it->second);
      }
      w.row(row);
    }
  });
}

CatalogEntry save_sheet(const fs::path& sheet_dir, const MapSheet& sheet) {
  fs::create_directories(sheet_dir);
  const fs::path file = sheet_dir / (sheet.sheet_id + ".png");
  write_png(file, sheet.image);
  return CatalogEntry{sheet.sheet_id, fs::absolute(file), sheet.bbox, sheet.metadata};
}

MapSheet load_catalog_sheet(const CatalogEntry& entry) {
  return load_local(entry.path, entry.sheet_id, entry.bbox, entry.metadata);
}

SheetCache::SheetCache(std::vector<CatalogEntry> catalog) : catalog_(std::move(catalog)) {
  for (std::size_t i = 0; i < catalog_.size(); ++i) by_id_[catalog_[i].sheet_id] = i;
}

std::shared_ptr<const MapSheet> SheetCache::get(const std::string& sheet_id) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = loaded_.find(sheet_id); it != loaded_.end()) return it->second;
  }
  auto idx = by_id_.find(sheet_id);
  if (idx == by_id_.end()) throw DataError("sheet '" + sheet_id + "' not in catalog");
  auto sheet = std::make_shared<const MapSheet>(load_catalog_sheet(catalog_[idx->second]));
  std::lock_guard lock(mutex_);
  return loaded_.emplace(sheet_id, std::move(sheet)).first->second;
}

}  // namespace patchwork
