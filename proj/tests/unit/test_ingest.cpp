#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include <httplib.h>

#include "patchwork/error.hpp"
#include "patchwork/fsutil.hpp"
#include "patchwork/ingest.hpp"
#include "patchwork/raster_io.hpp"
#include "test_support.hpp"

using namespace patchwork;
using namespace patchwork::geo;

namespace {

// Serves /{z}/{x}/{y}.png with a tile whose pixels encode (x, y), or 500
// for tiles listed in `broken`.
class StubTileServer {
 public:
  explicit StubTileServer(int tile_px = 256) : tile_px_(tile_px) {
    server_.Get(R"(/(\d+)/(\d+)/(\d+)\.png)", [this](const httplib::Request& req,
                                                      httplib::Response& res) {
      ++hits;
      const int x = std::stoi(req.matches[2]);
      const int y = std::stoi(req.matches[3]);
      if (broken_x == x) {
        res.status = 500;
        return;
      }
      Raster r(tile_px_, tile_px_, 1, static_cast<std::uint8_t>((x * 7 + y * 13) % 256));
      auto png = encode_png(r);
      res.set_content(std::string(png.begin(), png.end()), "image/png");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubTileServer() {
    server_.stop();
    thread_.join();
  }

  std::string url_template() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/{z}/{x}/{y}.png";
  }

  std::atomic<int> hits{0};
  std::atomic<int> broken_x{-1};

 private:
  int tile_px_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

TileSource source_for(const StubTileServer& s, const std::filesystem::path& cache) {
  TileSource src;
  src.url_template = s.url_template();
  src.cache_dir = cache;
  src.request_delay_ms = 0;
  src.retries = 1;
  src.workers = 2;
  return src;
}

}  // namespace

TEST(Ingest, FillTemplate) {
  TileSource src;
  src.url_template = "https://tiles.example/{z}/{x}/{y}.png";
  src.cache_dir = "/tmp/unused";
  EXPECT_EQ(fill_template(src, {14, 8190, 5447}), "https://tiles.example/14/8190/5447.png");
  EXPECT_EQ(fill_template(src, {0, 0, 0}), "https://tiles.example/0/0/0.png");
  src.url_template = "https://tiles.example/{z}/{x}.png";
  EXPECT_THROW(fill_template(src, {0, 0, 0}), ConfigError);
  src.url_template = "https://tiles.example/{z}/{x}/{y}/{y}.png";
  EXPECT_THROW(src.validate(), ConfigError);
}

TEST(Ingest, FetchSingleTileSheet) {
  StubTileServer server;
  testutil::TempDir dir;
  TileFetcher f(source_for(server, dir / "cache"), std::make_shared<HttpTransport>());
  auto t = tile_to_bbox({10, 500, 300});
  GeoBBox inner({t.center().lon() - 0.01, t.center().lat() - 0.01},
                {t.center().lon() + 0.01, t.center().lat() + 0.01});
  auto sheet = f.fetch_sheet(inner, 10, "s1");
  EXPECT_EQ(sheet.image.cols(), 256);
  EXPECT_EQ(sheet.image.rows(), 256);
  EXPECT_EQ(sheet.bbox, t);
}

TEST(Ingest, MosaicOfTwoByThreeTilesAndWarmCache) {
  StubTileServer server;
  testutil::TempDir dir;
  TileFetcher f(source_for(server, dir / "cache"), std::make_shared<HttpTransport>());
  auto a = tile_to_bbox({12, 2000, 1300});
  auto b = tile_to_bbox({12, 2002, 1301});
  GeoBBox box({a.center().lon(), b.center().lat()}, {b.center().lon(), a.center().lat()});
  auto sheet = f.fetch_sheet(box, 12, "mosaic");
  EXPECT_EQ(sheet.image.cols(), 768);
  EXPECT_EQ(sheet.image.rows(), 512);
  EXPECT_TRUE(sheet.bbox.contains(box));
  // Tile (2001, 1301) occupies columns 256..511, rows 256..511.
  EXPECT_EQ(sheet.image.at(300, 300), (2001 * 7 + 1301 * 13) % 256);
  EXPECT_EQ(sheet.image.at(10, 600), (2002 * 7 + 1300 * 13) % 256);
  EXPECT_EQ(f.network_requests(), 6u);
  EXPECT_EQ(server.hits.load(), 6);

  TileFetcher warm(source_for(server, dir / "cache"), std::make_shared<HttpTransport>());
  auto again = warm.fetch_sheet(box, 12, "mosaic");
  EXPECT_EQ(warm.network_requests(), 0u);
  EXPECT_EQ(server.hits.load(), 6);
  EXPECT_EQ(again.image, sheet.image);
}

TEST(Ingest, FailedTileReportsCoordinateAndNoMosaic) {
  StubTileServer server;
  server.broken_x = 2001;
  testutil::TempDir dir;
  TileFetcher f(source_for(server, dir / "cache"), std::make_shared<HttpTransport>());
  auto a = tile_to_bbox({12, 2000, 1300});
  auto b = tile_to_bbox({12, 2001, 1300});
  GeoBBox box({a.center().lon(), a.center().lat() - 0.001}, {b.center().lon(), a.center().lat()});
  try {
    f.fetch_sheet(box, 12, "bad");
    FAIL() << "expected TileFetchError";
  } catch (const TileFetchError& e) {
    EXPECT_EQ(e.tile(), TileCoord(12, 2001, 1300));
  }
  // One initial attempt plus one retry for the broken tile.
  EXPECT_EQ(server.hits.load(), 3);
}

TEST(Ingest, LoadLocalPngAndTiffWithSidecar) {
  testutil::TempDir dir;
  write_png(dir / "white.png", Raster(100, 100, 1, 255));
  GeoBBox bbox({-3.2, 55.9}, {-3.1, 56.0});
  auto s = load_local(dir / "white.png", "w", bbox);
  EXPECT_EQ(s.image.rows(), 100);
  EXPECT_EQ(s.bbox, bbox);

  write_tiff(dir / "t.tif", Raster(10, 20, 3, 9));
  atomic_write_text(dir / "meta.csv",
                    "sheet_id,min_lon,min_lat,max_lon,max_lat,survey_date\n"
                    "t,-3.2,55.9,-3.1,56.0,1894-01-01\n");
  auto meta = load_metadata(dir / "meta.csv");
  auto t = load_local(dir / "t.tif", "t", std::nullopt, meta.at("t"));
  EXPECT_EQ(t.image.cols(), 20);
  EXPECT_EQ(t.metadata.at("survey_date"), "1894-01-01");
  EXPECT_EQ(t.bbox, bbox);

  EXPECT_THROW(load_local(dir / "absent.png", "x", bbox), DataError);
  try {
    load_local(dir / "white.png", "w", std::nullopt);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("no georeference"), std::string::npos);
  }
}

TEST(Ingest, MetadataRecordsAndDuplicates) {
  testutil::TempDir dir;
  atomic_write_text(dir / "m.csv",
                    "sheet_id,survey_date,extra\na,1890,x\nb,1891,y\nc,1892,z\n");
  auto m = load_metadata(dir / "m.csv");
  EXPECT_EQ(m.size(), 3u);
  EXPECT_EQ(m.at("b").at("survey_date"), "1891");
  EXPECT_EQ(m.at("c").at("extra"), "z");
  atomic_write_text(dir / "d.csv", "sheet_id,v\na,1\nb,2\na,3\n");
  try {
    load_metadata(dir / "d.csv");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("a"), std::string::npos);
  }
  atomic_write_text(dir / "n.csv", "id,v\na,1\n");
  EXPECT_THROW(load_metadata(dir / "n.csv"), DataError);
}

TEST(Ingest, CatalogRoundTripAndCache) {
  testutil::TempDir dir;
  MapSheet s;
  s.sheet_id = "s1";
  s.image = Raster(12, 16, 1, 40);
  s.bbox = GeoBBox({-3.2, 55.9}, {-3.1, 56.0});
  s.metadata["survey_date"] = "1890-01-01";
  auto entry = save_sheet(dir / "sheets", s);
  write_catalog(dir / "catalog.csv", {entry});
  auto cat = read_catalog(dir / "catalog.csv");
  ASSERT_EQ(cat.size(), 1u);
  EXPECT_EQ(cat[0].bbox, s.bbox);
  SheetCache cache(cat);
  auto a = cache.get("s1");
  EXPECT_EQ(a->image, s.image);
  EXPECT_EQ(a.get(), cache.get("s1").get());
  EXPECT_THROW(cache.get("nope"), DataError);
}

TEST(Ingest, CropToBbox) {
  MapSheet s;
  s.sheet_id = "s";
  s.image = Raster(100, 200, 1, 0);
  s.bbox = GeoBBox({0, 0}, {2, 1});
  auto c = crop_to_bbox(s, GeoBBox({0.5, 0.25}, {1.5, 0.75}));
  EXPECT_EQ(c.image.cols(), 100);
  EXPECT_EQ(c.image.rows(), 50);
}
