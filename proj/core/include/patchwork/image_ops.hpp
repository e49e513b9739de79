#pragma once

#include <vector>

#include "patchwork/raster.hpp"

namespace patchwork {

/// Interleaved floating-point image with intensities nominally in [0, 1].
struct Image {
  int rows = 0;
  int cols = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int r, int c, int ch, double fill = 0.0)
      : rows(r), cols(c), channels(ch), data(static_cast<std::size_t>(r) * c * ch, fill) {}

  double& at(int r, int c, int ch = 0) {
    return data[(static_cast<std::size_t>(r) * cols + c) * channels + ch];
  }
  double at(int r, int c, int ch = 0) const {
    return data[(static_cast<std::size_t>(r) * cols + c) * channels + ch];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Converts to `channels` (1 = luma gray, 3 = RGB; gray sources are replicated).
Image to_image(const Raster& raster, int channels);

void flip_horizontal(Image& img);
void flip_vertical(Image& img);

/// Separable Gaussian blur, kernel radius ceil(3 sigma), edges replicated.
Image gaussian_blur(const Image& img, double sigma);

/// Bilinear resampling with pixel-centre alignment. Same-size input is
/// returned unchanged.
Image resize_bilinear(const Image& img, int rows, int cols);

}  // namespace patchwork
