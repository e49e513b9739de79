#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "patchwork/geo.hpp"
#include "patchwork/raster.hpp"

namespace patchwork {

using SheetMetadata = std::map<std::string, std::string>;

struct MapSheet {
  std::string sheet_id;
  Raster image;
  geo::GeoBBox bbox;
  SheetMetadata metadata;
};

/// XYZ tileserver description. The template must contain {z}, {x} and {y}
/// exactly once each.
struct TileSource {
  std::string url_template;
  int max_zoom = 19;
  int request_delay_ms = 100;
  std::filesystem::path cache_dir;
  int retries = 3;
  int workers = 4;
  int tile_px = 256;

  void validate() const;
  static TileSource from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

std::string fill_template(const TileSource& src, const geo::TileCoord& t);

/// Transport seam for tile downloads. get() returns the body for HTTP 200
/// and throws TileFetchError otherwise.
class TileTransport {
 public:
  virtual ~TileTransport() = default;
  virtual std::string get(const std::string& url) = 0;
};

/// cpp-httplib backed transport supporting http:// and https:// URLs.
class HttpTransport final : public TileTransport {
 public:
  explicit HttpTransport(int timeout_s = 30);
  std::string get(const std::string& url) override;

 private:
  int timeout_s_;
};

class TileFetchError : public std::runtime_error {
 public:
  TileFetchError(const geo::TileCoord& tile, const std::string& what)
      : std::runtime_error(what), tile_(tile) {}
  const geo::TileCoord& tile() const { return tile_; }

 private:
  geo::TileCoord tile_;
};

/// Downloads tiles through an on-disk cache and mosaics them into sheets.
/// Thread-safe; concurrent requests for one tile key are serialised.
class TileFetcher {
 public:
  TileFetcher(TileSource source, std::shared_ptr<TileTransport> transport);

  /// Encoded tile bytes, from the cache when present.
  std::string fetch_tile(const geo::TileCoord& t);
  Raster fetch_tile_raster(const geo::TileCoord& t);

  /// Mosaics every tile intersecting `bbox` at zoom `z`. The sheet bbox is the
  /// union of the tile boxes. Throws TileFetchError if any tile fails; no
  /// partial mosaic is returned.
  MapSheet fetch_sheet(const geo::GeoBBox& bbox, int z, const std::string& sheet_id);

  std::size_t network_requests() const { return network_requests_.load(); }
  std::filesystem::path cache_path(const geo::TileCoord& t) const;

 private:
  std::mutex& key_mutex(const geo::TileCoord& t);

  TileSource source_;
  std::shared_ptr<TileTransport> transport_;
  std::mutex table_mutex_;
  std::map<geo::TileCoord, std::unique_ptr<std::mutex>> key_mutexes_;
  std::mutex delay_mutex_;
  std::atomic<std::size_t> network_requests_{0};
};

/// Reads sheet metadata CSV keyed by the mandatory sheet_id column. Unknown
/// columns are preserved verbatim. Duplicate ids are rejected.
std::map<std::string, SheetMetadata> load_metadata(const std::filesystem::path& path);

/// Loads a PNG/TIFF sheet. The georeference comes from `bbox` or, failing
/// that, from min_lon/min_lat/max_lon/max_lat entries in `metadata`.
MapSheet load_local(const std::filesystem::path& path, const std::string& sheet_id,
                    std::optional<geo::GeoBBox> bbox, SheetMetadata metadata = {});

/// Optional neatline step: crops the sheet to the pixels covering `bbox`.
MapSheet crop_to_bbox(const MapSheet& sheet, const geo::GeoBBox& bbox);

/// Sheet catalog: CSV with sheet_id, path, min_lon, min_lat, max_lon, max_lat
/// and any metadata columns. Paths are relative to the catalog's directory.
struct CatalogEntry {
  std::string sheet_id;
  std::filesystem::path path;
  geo::GeoBBox bbox;
  SheetMetadata metadata;
};

std::vector<CatalogEntry> read_catalog(const std::filesystem::path& path);
void write_catalog(const std::filesystem::path& path, const std::vector<CatalogEntry>& entries);

/// Writes the sheet image next to the catalog and returns its entry.
CatalogEntry save_sheet(const std::filesystem::path& sheet_dir, const MapSheet& sheet);

MapSheet load_catalog_sheet(const CatalogEntry& entry);

/// Thread-safe lazy loader over a catalog; decoded sheets stay resident.
class SheetCache {
 public:
  explicit SheetCache(std::vector<CatalogEntry> catalog);

  std::shared_ptr<const MapSheet> get(const std::string& sheet_id);
  const std::vector<CatalogEntry>& catalog() const { return catalog_; }

 private:
  std::vector<CatalogEntry> catalog_;
  std::map<std::string, std::size_t> by_id_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const MapSheet>> loaded_;
};

}  // namespace patchwork
