#pragma once

#include <array>
#include <cstdint>
#include <string_view>

// Bundled sprite data for the overlay transforms. No font engine: glyphs are
// fixed bitmaps rasterized with nearest-neighbor scaling.
namespace d2lv::glyphs {

inline constexpr std::string_view kCharset = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

// 5x7 bitmap for a charset member; rows hold the 5 LSBs, MSB-first column.
// Returns nullptr for unsupported characters.
const std::uint8_t* font5x7(char c);

std::size_t emoji_count();

// 16 rows of 16 one-bit columns, MSB-first.
const std::array<std::uint16_t, 16>& emoji_sprite(std::size_t index);

} // namespace d2lv::glyphs
