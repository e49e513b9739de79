#include "patchwork/raster_io.hpp"

#include <png.h>
#include <spdlog/spdlog.h>
#include <tiffio.h>

#include <algorithm>
#include <array>
#include <cstring>
#include <memory>

#include "patchwork/error.hpp"
#include "patchwork/fsutil.hpp"

namespace patchwork {

namespace {

constexpr std::array<std::uint8_t, 8> kPngSignature = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

bool has_prefix(std::span<const std::uint8_t> bytes, std::span<const std::uint8_t> prefix) {
  return bytes.size() >= prefix.size() &&
         std::memcmp(bytes.data(), prefix.data(), prefix.size()) == 0;
}

bool is_tiff(std::span<const std::uint8_t> bytes) {
  static constexpr std::array<std::uint8_t, 4> le = {'I', 'I', 42, 0};
  static constexpr std::array<std::uint8_t, 4> be = {'M', 'M', 0, 42};
  return has_prefix(bytes, le) || has_prefix(bytes, be);
}

struct PngImage {
  png_image image{};
  PngImage() {
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&image); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

struct TiffCloser {
  void operator()(TIFF* t) const {
    if (t != nullptr) TIFFClose(t);
  }
};

}  // namespace

Raster decode_png(std::span<const std::uint8_t> bytes) {
  PngImage png;
  if (png_image_begin_read_from_memory(&png.image, bytes.data(), bytes.size()) == 0) {
    throw DataError(std::string("PNG decode failed: ") + png.image.message);
  }
  const bool color = (png.image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  const bool alpha = (png.image.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  if (alpha) spdlog::warn("PNG alpha channel dropped");

  const int src_channels = (color ? 3 : 1) + (alpha ? 1 : 0);
  png.image.format = color ? (alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB)
                           : (alpha ? PNG_FORMAT_GA : PNG_FORMAT_GRAY);
  const int rows = static_cast<int>(png.image.height);
  const int cols = static_cast<int>(png.image.width);
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(png.image));
  if (png_image_finish_read(&png.image, nullptr, buf.data(), 0, nullptr) == 0) {
    throw DataError(std::string("PNG decode failed: ") + png.image.message);
  }

  const int channels = color ? 3 : 1;
  if (!alpha) return Raster(rows, cols, channels, std::move(buf));

  Raster out(rows, cols, channels);
  auto dst = out.data();
  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  for (std::size_t i = 0; i < pixels; ++i) {
    for (int c = 0; c < channels; ++c) {
      dst[i * channels + c] = buf[i * src_channels + c];
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_png(const Raster& raster) {
  PngImage png;
  png.image.width = static_cast<png_uint_32>(raster.cols());
  png.image.height = static_cast<png_uint_32>(raster.rows());
  png.image.format = raster.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

  png_alloc_size_t size = 0;
  if (png_image_write_to_memory(&png.image, nullptr, &size, 0, raster.data().data(), 0,
                                nullptr) == 0) {
    throw DataError(std::string("PNG encode failed: ") + png.image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (png_image_write_to_memory(&png.image, out.data(), &size, 0, raster.data().data(), 0,
                                nullptr) == 0) {
    throw DataError(std::string("PNG encode failed: ") + png.image.message);
  }
  out.resize(size);
  return out;
}

Raster read_png(const std::filesystem::path& path) { return decode_png(read_file_bytes(path)); }

void write_png(const std::filesystem::path& path, const Raster& raster) {
  atomic_write_bytes(path, encode_png(raster));
}

Raster read_tiff(const std::filesystem::path& path) {
  std::unique_ptr<TIFF, TiffCloser> tif(TIFFOpen(path.c_str(), "r"));
  if (!tif) throw DataError("cannot open TIFF " + path.string());

  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint16_t samples = 1;
  TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &width);
  TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &height);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &samples);
  if (width == 0 || height == 0) throw DataError("empty TIFF " + path.string());

  std::vector<std::uint32_t> rgba(static_cast<std::size_t>(width) * height);
  if (TIFFReadRGBAImageOriented(tif.get(), width, height, rgba.data(), ORIENTATION_TOPLEFT, 0) ==
      0) {
    throw DataError("TIFF decode failed for " + path.string());
  }
  if (samples == 4 || samples == 2) spdlog::warn("TIFF alpha channel dropped: {}", path.string());

  const int channels = samples >= 3 ? 3 : 1;
  Raster out(static_cast<int>(height), static_cast<int>(width), channels);
  auto dst = out.data();
  for (std::size_t i = 0; i < rgba.size(); ++i) {
    const std::uint32_t px = rgba[i];
    if (channels == 3) {
      dst[i * 3 + 0] = static_cast<std::uint8_t>(TIFFGetR(px));
      dst[i * 3 + 1] = static_cast<std::uint8_t>(TIFFGetG(px));
      dst[i * 3 + 2] = static_cast<std::uint8_t>(TIFFGetB(px));
    } else {
      dst[i] = static_cast<std::uint8_t>(TIFFGetR(px));
    }
  }
  return out;
}

void write_tiff(const std::filesystem::path& path, const Raster& raster) {
  std::unique_ptr<TIFF, TiffCloser> tif(TIFFOpen(path.c_str(), "w"));
  if (!tif) throw DataError("cannot create TIFF " + path.string());
  TIFFSetField(tif.get(), TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(raster.cols()));
  TIFFSetField(tif.get(), TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(raster.rows()));
  TIFFSetField(tif.get(), TIFFTAG_SAMPLESPERPIXEL, static_cast<std::uint16_t>(raster.channels()));
  TIFFSetField(tif.get(), TIFFTAG_BITSPERSAMPLE, static_cast<std::uint16_t>(8));
  TIFFSetField(tif.get(), TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
  TIFFSetField(tif.get(), TIFFTAG_PHOTOMETRIC,
               raster.channels() == 3 ? PHOTOMETRIC_RGB : PHOTOMETRIC_MINISBLACK);
  TIFFSetField(tif.get(), TIFFTAG_ROWSPERSTRIP, static_cast<std::uint32_t>(raster.rows()));
  const std::size_t row_bytes = static_cast<std::size_t>(raster.cols()) * raster.channels();
  std::vector<std::uint8_t> row(row_bytes);
  for (int r = 0; r < raster.rows(); ++r) {
    std::copy_n(raster.data().data() + r * row_bytes, row_bytes, row.data());
    if (TIFFWriteScanline(tif.get(), row.data(), static_cast<std::uint32_t>(r), 0) < 0) {
      throw DataError("TIFF write failed for " + path.string());
    }
  }
}

Raster read_raster(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  if (has_prefix(bytes, kPngSignature)) return decode_png(bytes);
  if (is_tiff(bytes)) return read_tiff(path);
  throw DataError("unsupported raster format (expected PNG or TIFF): " + path.string());
}

}  // namespace patchwork
