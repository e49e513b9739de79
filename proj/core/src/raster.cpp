#include "patchwork/raster.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "patchwork/error.hpp"

namespace patchwork {

Raster::Raster(int rows, int cols, int channels, std::uint8_t fill)
    : rows_(rows), cols_(cols), channels_(channels) {
  if (rows < 1 || cols < 1 || (channels != 1 && channels != 3)) {
    throw DataError("raster must be at least 1x1 with 1 or 3 channels, got " +
                    std::to_string(rows) + "x" + std::to_string(cols) + "x" +
                    std::to_string(channels));
  }
  data_.assign(static_cast<std::size_t>(rows) * cols * channels, fill);
}

Raster::Raster(int rows, int cols, int channels, std::vector<std::uint8_t> data)
    : Raster(rows, cols, channels) {
  if (data.size() != data_.size()) {
    throw DataError("raster buffer size mismatch");
  }
  data_ = std::move(data);
}

Raster Raster::crop(const PixelRect& rect) const {
  if (rect.x0 < 0 || rect.y0 < 0 || rect.w < 1 || rect.h < 1 || rect.x0 + rect.w > cols_ ||
      rect.y0 + rect.h > rows_) {
    throw DataError("crop rectangle outside raster");
  }
  Raster out(rect.h, rect.w, channels_);
  const std::size_t row_bytes = static_cast<std::size_t>(rect.w) * channels_;
  for (int r = 0; r < rect.h; ++r) {
    const auto* src = data_.data() + index(rect.y0 + r, rect.x0, 0);
    std::copy_n(src, row_bytes, out.data_.data() + out.index(r, 0, 0));
  }
  return out;
}

void Raster::paste(const Raster& src, int x0, int y0) {
  if (src.channels_ != channels_) {
    throw DataError("paste: channel count mismatch");
  }
  const int c_begin = std::max(0, -x0);
  const int c_end = std::min(src.cols_, cols_ - x0);
  if (c_begin >= c_end) return;
  for (int r = std::max(0, -y0); r < src.rows_ && y0 + r < rows_; ++r) {
    const auto* from = src.data_.data() + src.index(r, c_begin, 0);
    std::copy_n(from, static_cast<std::size_t>(c_end - c_begin) * channels_,
                data_.data() + index(y0 + r, x0 + c_begin, 0));
  }
}

Raster Raster::to_gray() const {
  if (channels_ == 1) return *this;
  Raster out(rows_, cols_, 1);
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) {
      out.at(r, c) = static_cast<std::uint8_t>(std::lround(gray_intensity(*this, r, c) * 255.0));
    }
  }
  return out;
}

double gray_intensity(const Raster& r, int row, int col) {
  if (r.channels() == 1) return r.at(row, col) / 255.0;
  return (0.299 * r.at(row, col, 0) + 0.587 * r.at(row, col, 1) + 0.114 * r.at(row, col, 2)) /
         255.0;
}

}  // namespace patchwork
