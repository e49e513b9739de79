#include "patchwork/image_ops.hpp"

#include <algorithm>
#include <cmath>

#include "patchwork/error.hpp"

namespace patchwork {

Image to_image(const Raster& raster, int channels) {
  if (channels != 1 && channels != 3) throw ConfigError("image channels must be 1 or 3");
  Image img(raster.rows(), raster.cols(), channels);
  for (int r = 0; r < raster.rows(); ++r) {
    for (int c = 0; c < raster.cols(); ++c) {
      if (channels == 1) {
        img.at(r, c) = gray_intensity(raster, r, c);
      } else {
        for (int ch = 0; ch < 3; ++ch) {
          img.at(r, c, ch) = raster.at(r, c, raster.channels() == 3 ? ch : 0) / 255.0;
        }
      }
    }
  }
  return img;
}

void flip_horizontal(Image& img) {
  for (int r = 0; r < img.rows; ++r) {
    for (int c = 0; c < img.cols / 2; ++c) {
      for (int ch = 0; ch < img.channels; ++ch) {
        std::swap(img.at(r, c, ch), img.at(r, img.cols - 1 - c, ch));
      }
    }
  }
}

void flip_vertical(Image& img) {
  for (int r = 0; r < img.rows / 2; ++r) {
    for (int c = 0; c < img.cols; ++c) {
      for (int ch = 0; ch < img.channels; ++ch) {
        std::swap(img.at(r, c, ch), img.at(img.rows - 1 - r, c, ch));
      }
    }
  }
}

Image gaussian_blur(const Image& img, double sigma) {
  if (!(sigma > 0.0)) return img;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-(i * i) / (2.0 * sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = w;
    total += w;
  }
  for (auto& w : kernel) w /= total;

  Image tmp(img.rows, img.cols, img.channels);
  for (int r = 0; r < img.rows; ++r) {
    for (int c = 0; c < img.cols; ++c) {
      for (int ch = 0; ch < img.channels; ++ch) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int cc = std::clamp(c + i, 0, img.cols - 1);
          acc += kernel[static_cast<std::size_t>(i + radius)] * img.at(r, cc, ch);
        }
        tmp.at(r, c, ch) = acc;
      }
    }
  }
  Image out(img.rows, img.cols, img.channels);
  for (int r = 0; r < img.rows; ++r) {
    for (int c = 0; c < img.cols; ++c) {
      for (int ch = 0; ch < img.channels; ++ch) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int rr = std::clamp(r + i, 0, img.rows - 1);
          acc += kernel[static_cast<std::size_t>(i + radius)] * tmp.at(rr, c, ch);
        }
        out.at(r, c, ch) = acc;
      }
    }
  }
  return out;
}

Image resize_bilinear(const Image& img, int rows, int cols) {
  if (rows < 1 || cols < 1) throw ConfigError("resize target must be at least 1x1");
  if (rows == img.rows && cols == img.cols) return img;
  Image out(rows, cols, img.channels);
  const double sy = static_cast<double>(img.rows) / rows;
  const double sx = static_cast<double>(img.cols) / cols;
  for (int r = 0; r < rows; ++r) {
    const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.rows - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.rows - 1);
    const double wy = fy - y0;
    for (int c = 0; c < cols; ++c) {
      const double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.cols - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.cols - 1);
      const double wx = fx - x0;
      for (int ch = 0; ch < img.channels; ++ch) {
        const double top = img.at(y0, x0, ch) * (1.0 - wx) + img.at(y0, x1, ch) * wx;
        const double bottom = img.at(y1, x0, ch) * (1.0 - wx) + img.at(y1, x1, ch) * wx;
        out.at(r, c, ch) = top * (1.0 - wy) + bottom * wy;
      }
    }
  }
  return out;
}

}  // namespace patchwork
