#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "patchwork/annotation.hpp"
#include "patchwork/ingest.hpp"
#include "patchwork/spatial.hpp"

namespace patchwork {

/// Synthetic scanned-map corpus. Sheets are laid out edge to edge on a grid of
/// sheets; each sheet is a grid of square cells of `cell_m` meters, and every
/// cell is drawn as blank paper, hatched track, block buildings or both.
struct SynthConfig {
  int sheets = 20;
  int sheets_per_row = 5;
  int sheet_px = 1000;
  int cell_px = 100;
  double cell_m = 100.0;
  double origin_lon = -3.2;
  double origin_lat = 55.95;  // north edge of the first sheet row
  int track_walks = 2;        // random-walk tracks per sheet
  int track_length = 14;
  int building_clusters = 2;
  int cluster_size = 7;
  double buildings_on_track = 0.35;
  int stations = 120;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthCorpus {
  std::vector<CatalogEntry> catalog;
  /// Programmatic labels for every full cell, keyed by make_patch_id().
  std::vector<GoldRow> labels;
  std::vector<PointRecord> stations;
};

/// Writes sheets/<id>.png, catalog.csv, gold.csv and stations.csv below `dir`.
SynthCorpus generate_corpus(const std::filesystem::path& dir, const SynthConfig& cfg);

/// Context task: some cells carry a solid marker block; every other cell gets
/// label-independent clutter. A non-marker cell is labelled 1 when any of its
/// 8 neighbours is a marker, else 0. Marker cells are left unlabelled, so the
/// label cannot be read from the cell alone.
struct ContextSynthConfig {
  int sheets = 12;
  int sheets_per_row = 4;
  int sheet_px = 1000;
  int cell_px = 100;
  double cell_m = 100.0;
  double origin_lon = -3.2;
  double origin_lat = 55.95;
  double marker_rate = 0.083;
  std::uint64_t seed = 0;
};

/// Writes sheets, catalog.csv and gold.csv below `dir`.
SynthCorpus generate_context_corpus(const std::filesystem::path& dir, const ContextSynthConfig& cfg);

}  // namespace patchwork
