#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "patchwork/raster.hpp"

namespace patchwork {

/// Decodes PNG bytes. Alpha is dropped (with a warning); 16-bit is reduced to 8-bit.
Raster decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const Raster& raster);

Raster read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Raster& raster);

Raster read_tiff(const std::filesystem::path& path);
void write_tiff(const std::filesystem::path& path, const Raster& raster);

/// Dispatches on the file signature (PNG or TIFF). Throws DataError otherwise.
Raster read_raster(const std::filesystem::path& path);

}  // namespace patchwork
