#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace gfm {

std::uint32_t crc32(std::span<const std::byte> bytes, std::uint32_t seed = 0);
std::uint32_t crc32(std::string_view text, std::uint32_t seed = 0);

}  // namespace gfm
