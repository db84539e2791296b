#include "glyphs.hpp"

namespace d2lv::glyphs {
namespace {

struct Glyph {
  char ch;
  std::uint8_t rows[7];
};

constexpr Glyph kFont[] = {
    {'A', {0b01110, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001}},
    {'B', {0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110}},
    {'C', {0b01110, 0b10001, 0b10000, 0b10000, 0b10000, 0b10001, 0b01110}},
    {'D', {0b11100, 0b10010, 0b10001, 0b10001, 0b10001, 0b10010, 0b11100}},
    {'E', {0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b11111}},
    {'F', {0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b10000}},
    {'G', {0b01110, 0b10001, 0b10000, 0b10111, 0b10001, 0b10001, 0b01111}},
    {'H', {0b10001, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001}},
    {'I', {0b01110, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
    {'J', {0b00111, 0b00010, 0b00010, 0b00010, 0b00010, 0b10010, 0b01100}},
    {'K', {0b10001, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010, 0b10001}},
    {'L', {0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b11111}},
    {'M', {0b10001, 0b11011, 0b10101, 0b10101, 0b10001, 0b10001, 0b10001}},
    {'N', {0b10001, 0b10001, 0b11001, 0b10101, 0b10011, 0b10001, 0b10001}},
    {'O', {0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110}},
    {'P', {0b11110, 0b10001, 0b10001, 0b11110, 0b10000, 0b10000, 0b10000}},
    {'Q', {0b01110, 0b10001, 0b10001, 0b10001, 0b10101, 0b10010, 0b01101}},
    {'R', {0b11110, 0b10001, 0b10001, 0b11110, 0b10100, 0b10010, 0b10001}},
    {'S', {0b01111, 0b10000, 0b10000, 0b01110, 0b00001, 0b00001, 0b11110}},
    {'T', {0b11111, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100}},
    {'U', {0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110}},
    {'V', {0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01010, 0b00100}},
    {'W', {0b10001, 0b10001, 0b10001, 0b10101, 0b10101, 0b10101, 0b01010}},
    {'X', {0b10001, 0b10001, 0b01010, 0b00100, 0b01010, 0b10001, 0b10001}},
    {'Y', {0b10001, 0b10001, 0b10001, 0b01010, 0b00100, 0b00100, 0b00100}},
    {'Z', {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b11111}},
    {'0', {0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110}},
    {'1', {0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
    {'2', {0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111}},
    {'3', {0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110}},
    {'4', {0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010}},
    {'5', {0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110}},
    {'6', {0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110}},
    {'7', {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000}},
    {'8', {0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110}},
    {'9', {0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100}},
};

using Sprite = std::array<std::uint16_t, 16>;

constexpr Sprite kSmiley = {
    0b0000011111100000, 0b0001100000011000, 0b0010000000000100, 0b0100000000000010,
    0b0100110000110010, 0b1000110000110001, 0b1000000000000001, 0b1000000000000001,
    0b1000100000010001, 0b1000010000100001, 0b0100001111000010, 0b0100000000000010,
    0b0010000000000100, 0b0001100000011000, 0b0000011111100000, 0b0000000000000000,
};

constexpr Sprite kHeart = {
    0b0000000000000000, 0b0001110000111000, 0b0011111001111100, 0b0111111111111110,
    0b0111111111111110, 0b1111111111111111, 0b1111111111111111, 0b1111111111111111,
    0b0111111111111110, 0b0011111111111100, 0b0001111111111000, 0b0000111111110000,
    0b0000011111100000, 0b0000001111000000, 0b0000000110000000, 0b0000000000000000,
};

constexpr Sprite kStar = {
    0b0000000110000000, 0b0000000110000000, 0b0000001111000000, 0b0000001111000000,
    0b0000011111100000, 0b1111111111111111, 0b0111111111111110, 0b0011111111111100,
    0b0001111111111000, 0b0000111111110000, 0b0001111111111000, 0b0011111001111100,
    0b0011100000011100, 0b0110000000000110, 0b0100000000000010, 0b0000000000000000,
};

constexpr Sprite kBolt = {
    0b0000000111110000, 0b0000001111100000, 0b0000011111000000, 0b0000111110000000,
    0b0001111111111000, 0b0011111111110000, 0b0000000111100000, 0b0000001111000000,
    0b0000011110000000, 0b0000111100000000, 0b0001111000000000, 0b0011110000000000,
    0b0111100000000000, 0b0111000000000000, 0b0110000000000000, 0b0100000000000000,
};

constexpr const Sprite* kEmoji[] = {&kSmiley, &kHeart, &kStar, &kBolt};

} // namespace

const std::uint8_t* font5x7(char c) {
  for (const auto& g : kFont) {
    if (g.ch == c) return g.rows;
  }
  return nullptr;
}

std::size_t emoji_count() { return sizeof(kEmoji) / sizeof(kEmoji[0]); }

const std::array<std::uint16_t, 16>& emoji_sprite(std::size_t index) {
  return *kEmoji[index % emoji_count()];
}

} // namespace d2lv::glyphs
