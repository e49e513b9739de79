#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "patchwork/geo.hpp"
#include "patchwork/ingest.hpp"
#include "patchwork/raster.hpp"

namespace patchwork {

struct Patch {
  std::string patch_id;
  std::string sheet_id;
  int row = 0;  // grid row within the sheet
  int col = 0;  // grid column within the sheet
  PixelRect rect;
  geo::GeoBBox footprint;
  geo::GeoPoint center;
  double mean = 0.0;
  double std = 0.0;
  bool partial = false;
};

enum class SliceMode { Pixels, Meters };

struct SliceSpec {
  SliceMode mode = SliceMode::Meters;
  double size = 100.0;
  bool keep_partial = false;

  void validate() const;
};

struct PatchStats {
  double mean = 0.0;
  double std = 0.0;
};

/// "{sheet_id}-r{row:04}-c{col:04}"
std::string make_patch_id(const std::string& sheet_id, int row, int col);
/// Recovers (row, col) from an id built by make_patch_id.
std::pair<int, int> parse_grid_position(const std::string& patch_id);

/// Ground size of one pixel (east-west, north-south) in meters, measured with
/// haversine across the bbox at its mid-latitude / mid-longitude.
std::pair<double, double> meters_per_pixel(const MapSheet& sheet);

/// Patch side in pixels for `spec` on `sheet` (nearest integer, at least 1).
int patch_side_px(const MapSheet& sheet, const SliceSpec& spec);

/// Grid anchored at pixel (0, 0) with stride = side, emitted row-major.
/// Edge remainders are kept as partial patches only when spec.keep_partial.
std::vector<Patch> slice(const MapSheet& sheet, const SliceSpec& spec);

/// Population mean/std of luma intensity in [0, 1] over `rect`.
PatchStats patch_stats(const Raster& image, const PixelRect& rect);

/// Slices several sheets on `workers` threads; output is ordered by
/// (sheet_id, row, col) whatever the worker count. Sheets are loaded lazily.
std::vector<Patch> slice_catalog(const std::vector<CatalogEntry>& catalog, const SliceSpec& spec,
                                 int workers);

void write_patch_index(const std::filesystem::path& path, const std::vector<Patch>& patches);
std::vector<Patch> read_patch_index(const std::filesystem::path& path);

}  // namespace patchwork
