#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace patchwork {

/// Pixel rectangle in sheet coordinates; (x0, y0) is the top-left pixel.
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;

  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// 8-bit interleaved raster with 1 (gray) or 3 (RGB) channels.
class Raster {
 public:
  Raster() = default;
  Raster(int rows, int cols, int channels, std::uint8_t fill = 0);
  Raster(int rows, int cols, int channels, std::vector<std::uint8_t> data);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }

  std::uint8_t& at(int row, int col, int ch = 0) {
    return data_[index(row, col, ch)];
  }
  std::uint8_t at(int row, int col, int ch = 0) const { return data_[index(row, col, ch)]; }

  std::span<const std::uint8_t> data() const { return data_; }
  std::span<std::uint8_t> data() { return data_; }

  /// Copy of `rect`; the rectangle must lie inside the raster.
  Raster crop(const PixelRect& rect) const;
  /// Writes `src` with its top-left corner at (x0, y0), clipping to this raster.
  void paste(const Raster& src, int x0, int y0);
  /// Luma-weighted single-channel copy (0.299 R + 0.587 G + 0.114 B).
  Raster to_gray() const;

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t index(int row, int col, int ch) const {
    return (static_cast<std::size_t>(row) * cols_ + col) * channels_ + ch;
  }

  int rows_ = 0;
  int cols_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Grayscale intensity in [0, 1] of one pixel.
double gray_intensity(const Raster& r, int row, int col);

}  // namespace patchwork
