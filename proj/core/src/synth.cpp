#include "patchwork/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <set>

#include "patchwork/error.hpp"
#include "patchwork/patchify.hpp"
#include "patchwork/rng.hpp"

namespace patchwork {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::uint8_t, 3> kPaper = {236, 228, 210};
constexpr std::array<std::uint8_t, 3> kInk = {52, 46, 40};
constexpr std::array<std::uint8_t, 3> kBlock = {78, 64, 58};

// Direction bits for track connections.
constexpr int kNorth = 1, kEast = 2, kSouth = 4, kWest = 8;
constexpr int kDr[4] = {-1, 0, 1, 0};
constexpr int kDc[4] = {0, 1, 0, -1};
constexpr int kBit[4] = {kNorth, kEast, kSouth, kWest};
constexpr int kOpposite[4] = {kSouth, kWest, kNorth, kEast};

double meters_per_degree() { return geo::kEarthRadiusM * std::acos(-1.0) / 180.0; }

struct Layout {
  int cells = 0;  // cells per sheet side
  double dlat = 0.0;
  std::vector<double> dlon_per_row;
};

Layout make_layout(int sheets, int per_row, int sheet_px, int cell_px, double cell_m,
                   double origin_lat) {
  Layout l;
  l.cells = sheet_px / cell_px;
  const double sheet_m = l.cells * cell_m;
  l.dlat = sheet_m / meters_per_degree();
  const int rows = (sheets + per_row - 1) / per_row;
  for (int r = 0; r < rows; ++r) {
    const double mid = origin_lat - (r + 0.5) * l.dlat;
    l.dlon_per_row.push_back(sheet_m / (meters_per_degree() * std::cos(geo::deg_to_rad(mid))));
  }
  return l;
}

geo::GeoBBox sheet_bbox(const Layout& l, int index, int per_row, double origin_lon,
                        double origin_lat) {
  const int r = index / per_row;
  const int c = index % per_row;
  const double dlon = l.dlon_per_row[static_cast<std::size_t>(r)];
  const double north = origin_lat - r * l.dlat;
  const double west = origin_lon + c * dlon;
  return {geo::GeoPoint(west, north - l.dlat), geo::GeoPoint(west + dlon, north)};
}

std::string sheet_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sheet-%02d", i);
  return buf;
}

Raster paper(int px, Rng& rng) {
  Raster img(px, px, 3);
  for (int r = 0; r < px; ++r) {
    for (int c = 0; c < px; ++c) {
      const int n = static_cast<int>(uniform_index(rng, 17)) - 8;
      for (int ch = 0; ch < 3; ++ch) {
        img.at(r, c, ch) = static_cast<std::uint8_t>(std::clamp(kPaper[ch] + n, 0, 255));
      }
    }
  }
  return img;
}

void fill_rect(Raster& img, int x0, int y0, int w, int h, const std::array<std::uint8_t, 3>& color) {
  for (int y = std::max(y0, 0); y < std::min(y0 + h, img.rows()); ++y) {
    for (int x = std::max(x0, 0); x < std::min(x0 + w, img.cols()); ++x) {
      for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = color[static_cast<std::size_t>(ch)];
    }
  }
}

// Double rails with cross ties from the cell centre towards one edge.
// Tie spacing follows absolute pixel positions so neighbouring cells line up.
void draw_track_arm(Raster& img, int cx, int cy, int half, int dir) {
  constexpr int kGauge = 5, kTie = 9, kTieStep = 9;
  switch (dir) {
    case 0:  // north
    case 2: {  // south
      const int y_from = dir == 0 ? cy - half : cy - kGauge - 1;
      const int y_to = dir == 0 ? cy + kGauge + 1 : cy + half;
      fill_rect(img, cx - kGauge - 1, y_from, 2, y_to - y_from, kInk);
      fill_rect(img, cx + kGauge, y_from, 2, y_to - y_from, kInk);
      for (int y = y_from; y < y_to; ++y) {
        if (y % kTieStep == 0) fill_rect(img, cx - kTie, y, 2 * kTie, 2, kInk);
      }
      break;
    }
    default: {  // east / west
      const int x_from = dir == 3 ? cx - half : cx - kGauge - 1;
      const int x_to = dir == 3 ? cx + kGauge + 1 : cx + half;
      fill_rect(img, x_from, cy - kGauge - 1, x_to - x_from, 2, kInk);
      fill_rect(img, x_from, cy + kGauge, x_to - x_from, 2, kInk);
      for (int x = x_from; x < x_to; ++x) {
        if (x % kTieStep == 0) fill_rect(img, x, cy - kTie, 2, 2 * kTie, kInk);
      }
      break;
    }
  }
}

void draw_buildings(Raster& img, int x0, int y0, int cell, bool avoid_track, Rng& rng) {
  const int count = 1 + static_cast<int>(uniform_index(rng, 3));
  // Corner slots keep blocks clear of the centre lines where track runs.
  const int lo = cell * 8 / 100;
  const int hi = cell * 38 / 100;
  std::vector<int> corners = {0, 1, 2, 3};
  shuffle(corners, rng);
  for (int i = 0; i < count; ++i) {
    const int max_side = avoid_track ? hi - lo : cell * 35 / 100;
    const int w = cell * 15 / 100 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(
                                                                            max_side - cell * 15 / 100 + 1)));
    const int h = cell * 15 / 100 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(
                                                                            max_side - cell * 15 / 100 + 1)));
    int bx = 0, by = 0;
    if (avoid_track) {
      const int corner = corners[static_cast<std::size_t>(i)];
      const int ox = (corner & 1) ? cell - hi : lo;
      const int oy = (corner & 2) ? cell - hi : lo;
      bx = ox + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo - w + 1)));
      by = oy + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo - h + 1)));
    } else {
      bx = lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cell - 2 * lo - w + 1)));
      by = lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cell - 2 * lo - h + 1)));
    }
    fill_rect(img, x0 + bx, y0 + by, w, h, kBlock);
  }
}

geo::GeoPoint cell_center(const geo::GeoBBox& bbox, int cells, int r, int c) {
  const double fx = (c + 0.5) / cells;
  const double fy = (r + 0.5) / cells;
  return {bbox.min().lon() + fx * bbox.width_deg(), bbox.max().lat() - fy * bbox.height_deg()};
}

geo::GeoPoint offset_m(const geo::GeoPoint& p, double east_m, double north_m) {
  const double dlat = north_m / meters_per_degree();
  const double dlon = east_m / (meters_per_degree() * std::cos(geo::deg_to_rad(p.lat())));
  return {p.lon() + dlon, p.lat() + dlat};
}

}  // namespace

void SynthConfig::validate() const {
  if (sheets < 1 || sheets_per_row < 1) throw ConfigError("synth needs at least one sheet");
  if (cell_px < 20 || sheet_px < cell_px || sheet_px % cell_px != 0) {
    throw ConfigError("sheet_px must be a multiple of cell_px (>= 20)");
  }
  if (!(cell_m > 0.0)) throw ConfigError("cell_m must be positive");
  if (track_length < 1 || track_walks < 0 || building_clusters < 0 || cluster_size < 1) {
    throw ConfigError("invalid synth glyph counts");
  }
}

SynthCorpus generate_corpus(const fs::path& dir, const SynthConfig& cfg) {
  cfg.validate();
  const Layout layout = make_layout(cfg.sheets, cfg.sheets_per_row, cfg.sheet_px, cfg.cell_px,
                                    cfg.cell_m, cfg.origin_lat);
  const int n = layout.cells;
  SynthCorpus corpus;
  std::vector<std::pair<geo::GeoPoint, int>> track_cells;  // centre, sheet index

  for (int s = 0; s < cfg.sheets; ++s) {
    Rng rng(derive_seed({cfg.seed, 0x73686565ULL, static_cast<std::uint64_t>(s)}));
    std::vector<int> track(static_cast<std::size_t>(n * n), 0);
    std::vector<bool> building(static_cast<std::size_t>(n * n), false);
    auto at = [n](int r, int c) { return static_cast<std::size_t>(r * n + c); };

    for (int w = 0; w < cfg.track_walks; ++w) {
      // Enter from a random border cell, heading inwards.
      const int side = static_cast<int>(uniform_index(rng, 4));
      const int pos = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n)));
      int r = side == 0 ? 0 : side == 2 ? n - 1 : pos;
      int c = side == 3 ? 0 : side == 1 ? n - 1 : pos;
      track[at(r, c)] |= kBit[side];
      std::set<std::size_t> visited = {at(r, c)};
      for (int step = 1; step < cfg.track_length; ++step) {
        std::vector<int> dirs;
        for (int d = 0; d < 4; ++d) {
          const int nr = r + kDr[d], nc = c + kDc[d];
          if (nr < 0 || nc < 0 || nr >= n || nc >= n) continue;
          if (visited.count(at(nr, nc))) continue;
          dirs.push_back(d);
        }
        if (dirs.empty()) break;
        const int d = dirs[uniform_index(rng, dirs.size())];
        track[at(r, c)] |= kBit[d];
        r += kDr[d];
        c += kDc[d];
        track[at(r, c)] |= kOpposite[d];
        visited.insert(at(r, c));
      }
    }

    for (int k = 0; k < cfg.building_clusters; ++k) {
      int r = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n)));
      int c = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n)));
      building[at(r, c)] = true;
      for (int i = 1; i < cfg.cluster_size; ++i) {
        const int d = static_cast<int>(uniform_index(rng, 4));
        r = std::clamp(r + kDr[d], 0, n - 1);
        c = std::clamp(c + kDc[d], 0, n - 1);
        building[at(r, c)] = true;
      }
    }
    for (std::size_t i = 0; i < track.size(); ++i) {
      if (track[i] && bernoulli(rng, cfg.buildings_on_track)) building[i] = true;
    }

    MapSheet sheet;
    sheet.sheet_id = sheet_name(s);
    sheet.bbox = sheet_bbox(layout, s, cfg.sheets_per_row, cfg.origin_lon, cfg.origin_lat);
    sheet.image = paper(cfg.sheet_px, rng);
    const int survey_year = 1880 + static_cast<int>(uniform_index(rng, 26));
    sheet.metadata["survey_date"] = std::to_string(survey_year) + "-01-01";
    sheet.metadata["published_date"] = std::to_string(survey_year + 2);

    const int cell = cfg.cell_px;
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        const int mask = track[at(r, c)];
        const bool has_building = building[at(r, c)];
        if (mask) {
          for (int d = 0; d < 4; ++d) {
            if (mask & kBit[d]) draw_track_arm(sheet.image, c * cell + cell / 2, r * cell + cell / 2, cell / 2, d);
          }
          track_cells.push_back({cell_center(sheet.bbox, n, r, c), s});
        }
        if (has_building) draw_buildings(sheet.image, c * cell, r * cell, cell, mask != 0, rng);
        const int label = (mask ? 1 : 0) + (has_building ? 2 : 0);
        corpus.labels.push_back({make_patch_id(sheet.sheet_id, r, c), label, "synth",
                                 AnnotationSource::Fresh, false});
      }
    }
    corpus.catalog.push_back(save_sheet(dir / "sheets", sheet));
  }

  Rng rng(derive_seed({cfg.seed, 0x73746174ULL}));
  for (int i = 0; i < cfg.stations && !track_cells.empty(); ++i) {
    const auto& [center, s] = track_cells[uniform_index(rng, track_cells.size())];
    PointRecord p;
    char id[32];
    std::snprintf(id, sizeof id, "st-%04d", i);
    p.id = id;
    p.name = "Station " + std::to_string(i);
    p.location = offset_m(center, uniform_real(rng, -30.0, 30.0), uniform_real(rng, -30.0, 30.0));
    p.attributes["opened"] = std::to_string(1830 + static_cast<int>(uniform_index(rng, 76)));
    p.attributes["closed"] = "";
    corpus.stations.push_back(std::move(p));
  }

  std::sort(corpus.labels.begin(), corpus.labels.end(),
            [](const GoldRow& a, const GoldRow& b) { return a.patch_id < b.patch_id; });
  write_catalog(dir / "catalog.csv", corpus.catalog);
  write_gold_standard(dir / "gold.csv", corpus.labels);
  write_points(dir / "stations.csv", corpus.stations);
  return corpus;
}

SynthCorpus generate_context_corpus(const fs::path& dir, const ContextSynthConfig& cfg) {
  if (cfg.sheets < 1 || cfg.cell_px < 20 || cfg.sheet_px % cfg.cell_px != 0) {
    throw ConfigError("invalid context corpus geometry");
  }
  const Layout layout = make_layout(cfg.sheets, cfg.sheets_per_row, cfg.sheet_px, cfg.cell_px,
                                    cfg.cell_m, cfg.origin_lat);
  const int n = layout.cells;
  const int cell = cfg.cell_px;
  SynthCorpus corpus;

  for (int s = 0; s < cfg.sheets; ++s) {
    Rng rng(derive_seed({cfg.seed, 0x63747874ULL, static_cast<std::uint64_t>(s)}));
    std::vector<bool> marker(static_cast<std::size_t>(n * n));
    for (auto&& m : marker) m = bernoulli(rng, cfg.marker_rate);
    auto is_marker = [&](int r, int c) {
      return r >= 0 && c >= 0 && r < n && c < n && marker[static_cast<std::size_t>(r * n + c)];
    };

    MapSheet sheet;
    sheet.sheet_id = sheet_name(s);
    sheet.bbox = sheet_bbox(layout, s, cfg.sheets_per_row, cfg.origin_lon, cfg.origin_lat);
    sheet.image = paper(cfg.sheet_px, rng);

    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        const int x0 = c * cell, y0 = r * cell;
        if (is_marker(r, c)) {
          fill_rect(sheet.image, x0 + cell / 10, y0 + cell / 10, cell * 8 / 10, cell * 8 / 10, kInk);
          continue;
        }
        // Clutter drawn the same way whatever the label.
        const int blobs = static_cast<int>(uniform_index(rng, 5));
        for (int b = 0; b < blobs; ++b) {
          const int w = 4 + static_cast<int>(uniform_index(rng, 7));
          const int h = 4 + static_cast<int>(uniform_index(rng, 7));
          const int bx = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cell - w)));
          const int by = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cell - h)));
          fill_rect(sheet.image, x0 + bx, y0 + by, w, h, kBlock);
        }
        bool near_marker = false;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            if ((dr || dc) && is_marker(r + dr, c + dc)) near_marker = true;
          }
        }
        corpus.labels.push_back({make_patch_id(sheet.sheet_id, r, c), near_marker ? 1 : 0,
                                 "synth", AnnotationSource::Fresh, false});
      }
    }
    corpus.catalog.push_back(save_sheet(dir / "sheets", sheet));
  }
  std::sort(corpus.labels.begin(), corpus.labels.end(),
            [](const GoldRow& a, const GoldRow& b) { return a.patch_id < b.patch_id; });
  write_catalog(dir / "catalog.csv", corpus.catalog);
  write_gold_standard(dir / "gold.csv", corpus.labels);
  return corpus;
}

}  // namespace patchwork
