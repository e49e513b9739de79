#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace patchwork {

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

}  // namespace patchwork
