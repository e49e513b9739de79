#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "patchwork/base64.hpp"
#include "patchwork/csv.hpp"
#include "patchwork/error.hpp"
#include "patchwork/fsutil.hpp"
#include "patchwork/image_ops.hpp"
#include "patchwork/raster.hpp"
#include "patchwork/raster_io.hpp"
#include "test_support.hpp"

using namespace patchwork;

TEST(Csv, ParsesQuotedFields) {
  auto t = CsvTable::parse("a,b,c\n1,\"x,y\",\"he said \"\"hi\"\"\"\r\n2,,\"multi\nline\"\n");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.rows()[0][1], "x,y");
  EXPECT_EQ(t.rows()[0][2], "he said \"hi\"");
  EXPECT_EQ(t.rows()[1][1], "");
  EXPECT_EQ(t.rows()[1][2], "multi\nline");
  EXPECT_EQ(t.column("c"), 2u);
  EXPECT_FALSE(t.column("d"));
  EXPECT_THROW(t.require_column("d"), DataError);
}

TEST(Csv, RejectsRaggedRowsAndOpenQuotes) {
  EXPECT_THROW(CsvTable::parse("a,b\n1\n"), DataError);
  EXPECT_THROW(CsvTable::parse("a,b\n\"1,2\n"), DataError);
  EXPECT_THROW(CsvTable::parse(""), DataError);
}

TEST(Csv, WriterRoundTrip) {
  std::ostringstream os;
  CsvWriter w(os);
  w.row({"id", "text"});
  w.row({"1", "comma, \"quote\"\nnewline"});
  w.row({"2", "plain"});
  auto t = CsvTable::parse(os.str());
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.rows()[0][1], "comma, \"quote\"\nnewline");
  EXPECT_EQ(csv_escape("plain"), "plain");
}

TEST(Csv, NumberFormatting) {
  EXPECT_EQ(format_fixed(1.0 / 3.0, 4), "0.3333");
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = d(rng);
    EXPECT_EQ(parse_double(format_shortest(v), "v"), v);
  }
  EXPECT_THROW(parse_double("abc", "v"), DataError);
  EXPECT_THROW(parse_int("1.5", "v"), DataError);
  EXPECT_EQ(parse_int("-42", "v"), -42);
}

TEST(Base64, RoundTripAndKnownVector) {
  const std::string s = "foobar";
  std::vector<std::uint8_t> bytes(s.begin(), s.end());
  EXPECT_EQ(base64_encode(bytes), "Zm9vYmFy");
  EXPECT_EQ(base64_encode(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 4)), "Zm9vYg==");
  std::mt19937 rng(1);
  for (int n = 0; n < 40; ++n) {
    std::vector<std::uint8_t> v(n);
    for (auto& b : v) b = static_cast<std::uint8_t>(rng());
    EXPECT_EQ(base64_decode(base64_encode(v)), v);
  }
}

namespace {

Raster random_raster(int rows, int cols, int ch, unsigned seed) {
  std::mt19937 rng(seed);
  Raster r(rows, cols, ch);
  for (auto& b : r.data()) b = static_cast<std::uint8_t>(rng());
  return r;
}

}  // namespace

TEST(Raster, CropAndPaste) {
  auto r = random_raster(20, 30, 3, 1);
  auto c = r.crop({5, 4, 10, 6});
  EXPECT_EQ(c.rows(), 6);
  EXPECT_EQ(c.cols(), 10);
  EXPECT_EQ(c.at(0, 0, 2), r.at(4, 5, 2));
  EXPECT_EQ(c.at(5, 9, 1), r.at(9, 14, 1));
  Raster canvas(10, 10, 3, 0);
  canvas.paste(c, 5, 5);  // clipped
  EXPECT_EQ(canvas.at(5, 5, 0), c.at(0, 0, 0));
  EXPECT_EQ(canvas.at(9, 9, 2), c.at(4, 4, 2));
  EXPECT_EQ(canvas.at(4, 4, 0), 0);
}

TEST(Raster, GrayConversion) {
  Raster rgb(1, 1, 3);
  rgb.at(0, 0, 0) = 255;
  EXPECT_EQ(rgb.to_gray().at(0, 0), 76);  // round(0.299 * 255)
  Raster white(2, 2, 1, 255);
  EXPECT_DOUBLE_EQ(gray_intensity(white, 1, 1), 1.0);
}

TEST(RasterIo, PngRoundTrip) {
  testutil::TempDir dir;
  for (int ch : {1, 3}) {
    auto r = random_raster(17, 23, ch, 7 + ch);
    write_png(dir / "a.png", r);
    EXPECT_EQ(read_png(dir / "a.png"), r);
    EXPECT_EQ(read_raster(dir / "a.png"), r);
    EXPECT_EQ(decode_png(encode_png(r)), r);
  }
}

TEST(RasterIo, TiffRoundTrip) {
  testutil::TempDir dir;
  for (int ch : {1, 3}) {
    auto r = random_raster(31, 9, ch, 3 + ch);
    write_tiff(dir / "a.tif", r);
    EXPECT_EQ(read_tiff(dir / "a.tif"), r);
    EXPECT_EQ(read_raster(dir / "a.tif"), r);
  }
}

TEST(RasterIo, RejectsUnknownFormat) {
  testutil::TempDir dir;
  atomic_write_text(dir / "x.png", "not an image");
  EXPECT_THROW(read_raster(dir / "x.png"), DataError);
  EXPECT_THROW(read_raster(dir / "missing.png"), std::exception);
}

TEST(ImageOps, FlipsAreInvolutions) {
  auto img = to_image(random_raster(7, 5, 3, 4), 3);
  auto copy = img;
  flip_horizontal(copy);
  EXPECT_NE(copy, img);
  flip_horizontal(copy);
  EXPECT_EQ(copy, img);
  flip_vertical(copy);
  flip_vertical(copy);
  EXPECT_EQ(copy, img);
}

TEST(ImageOps, BlurKeepsConstantAndMass) {
  Image c(9, 9, 1, 0.3);
  auto b = gaussian_blur(c, 1.5);
  for (double v : b.data) EXPECT_NEAR(v, 0.3, 1e-12);
  Image spike(21, 21, 1, 0.0);
  spike.at(10, 10) = 1.0;
  auto s = gaussian_blur(spike, 1.0);
  double sum = 0;
  for (double v : s.data) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-9);
  EXPECT_LT(s.at(10, 10), 1.0);
}

TEST(ImageOps, ResizeIdentityAndConstant) {
  auto img = to_image(random_raster(8, 8, 1, 9), 1);
  EXPECT_EQ(resize_bilinear(img, 8, 8), img);
  Image c(10, 10, 1, 0.7);
  auto r = resize_bilinear(c, 3, 4);
  EXPECT_EQ(r.rows, 3);
  EXPECT_EQ(r.cols, 4);
  for (double v : r.data) EXPECT_NEAR(v, 0.7, 1e-12);
}

TEST(FsUtil, AtomicWriteReplaces) {
  testutil::TempDir dir;
  atomic_write_text(dir / "f.txt", "one");
  atomic_write_text(dir / "f.txt", "two");
  EXPECT_EQ(read_file_text(dir / "f.txt"), "two");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++files;
  EXPECT_EQ(files, 1u);
}
