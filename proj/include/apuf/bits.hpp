#pragma once

// Fixed-width bit words and their hex codec.
//
// Bit order is MSB-first everywhere: index 0 is the most significant bit of
// the hex rendering and is the select bit of the first multiplexer stage.

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "apuf/error.hpp"
#include "apuf/rng.hpp"

namespace apuf {

class BitWord {
 public:
  BitWord() = default;
  explicit BitWord(std::size_t width) : width_(width), words_((width + 63) / 64, 0) {}

  std::size_t width() const noexcept { return width_; }

  bool operator[](std::size_t i) const noexcept {
    return (words_[i / 64] >> (63 - i % 64)) & 1U;
  }

  void set(std::size_t i, bool value) noexcept {
    const std::uint64_t mask = std::uint64_t{1} << (63 - i % 64);
    if (value) {
      words_[i / 64] |= mask;
    } else {
      words_[i / 64] &= ~mask;
    }
  }

  void flip(std::size_t i) noexcept { words_[i / 64] ^= std::uint64_t{1} << (63 - i % 64); }

  std::size_t popcount() const noexcept {
    std::size_t total = 0;
    for (std::uint64_t w : words_) total += static_cast<std::size_t>(std::popcount(w));
    return total;
  }

  // Bits beyond width() are kept zero, so word-wise equality is exact.
  friend bool operator==(const BitWord&, const BitWord&) = default;

  static BitWord uniform(std::size_t width, Rng& rng) {
    BitWord out(width);
    for (auto& w : out.words_) w = rng.next();
    out.clear_tail();
    return out;
  }

  static BitWord from_bits(std::initializer_list<int> bits) {
    BitWord out(bits.size());
    std::size_t i = 0;
    for (int b : bits) out.set(i++, b != 0);
    return out;
  }

 private:
  void clear_tail() noexcept {
    if (width_ % 64 != 0) words_.back() &= ~(UINT64_MAX >> (width_ % 64));
  }

  std::size_t width_ = 0;
  std::vector<std::uint64_t> words_;
};

// Challenge and Response share the representation but are not
// interchangeable in signatures.
class Challenge : public BitWord {
 public:
  using BitWord::BitWord;
  Challenge() = default;
  explicit Challenge(BitWord bits) : BitWord(std::move(bits)) {}
};

class Response : public BitWord {
 public:
  using BitWord::BitWord;
  Response() = default;
  explicit Response(BitWord bits) : BitWord(std::move(bits)) {}
};

inline std::size_t hamming_distance(const BitWord& a, const BitWord& b) {
  if (a.width() != b.width()) throw DimensionError("hamming distance of words with different widths");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.width(); ++i) d += a[i] != b[i];
  return d;
}

namespace detail {

inline int hex_value(char ch) noexcept {
  if (ch >= '0' && ch <= '9') return ch - '0';
  if (ch >= 'a' && ch <= 'f') return ch - 'a' + 10;
  if (ch >= 'A' && ch <= 'F') return ch - 'A' + 10;
  return -1;
}

}  // namespace detail

// Parses a hex word of the given width. Accepts an optional Verilog-style
// size prefix ("64h", "64'h", "'h"); if the prefix names a size it must equal
// `width`. The digits are right-aligned (left-padded with zeros).
inline BitWord parse_hex_word(std::string_view text, std::size_t width) {
  if (width == 0) throw InvalidParameter("hex word width must be positive");

  std::size_t start = 0;
  if (const auto h = text.find_first_of("hH"); h != std::string_view::npos) {
    std::string_view prefix = text.substr(0, h);
    if (!prefix.empty() && prefix.back() == '\'') prefix.remove_suffix(1);
    for (std::size_t i = 0; i < prefix.size(); ++i) {
      if (!std::isdigit(static_cast<unsigned char>(prefix[i]))) {
        throw ParseError("invalid character '" + std::string(1, prefix[i]) + "' in size prefix",
                         std::nullopt, i);
      }
    }
    if (!prefix.empty() &&
        (prefix.size() > 18 || std::stoull(std::string(prefix)) != width)) {
      throw WidthError("size prefix " + std::string(prefix) + " does not match width " +
                           std::to_string(width),
                       std::nullopt, std::size_t{0});
    }
    start = h + 1;
  }

  const std::string_view digits = text.substr(start);
  if (digits.empty()) throw ParseError("no hex digits", std::nullopt, start);
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (detail::hex_value(digits[i]) < 0) {
      throw ParseError("non-hex character '" + std::string(1, digits[i]) + "'", std::nullopt,
                       start + i);
    }
  }
  const std::size_t max_digits = (width + 3) / 4;
  if (digits.size() > max_digits) {
    throw WidthError(std::to_string(digits.size()) + " hex digits exceed width " +
                         std::to_string(width) + " (at most " + std::to_string(max_digits) + ")",
                     std::nullopt, start + max_digits);
  }

  BitWord out(width);
  // Bit k of the numeric value (k = 0 is the LSB) lands at index width-1-k.
  for (std::size_t i = 0; i < digits.size(); ++i) {
    const int v = detail::hex_value(digits[digits.size() - 1 - i]);
    for (int b = 0; b < 4; ++b) {
      if (((v >> b) & 1) == 0) continue;
      const std::size_t k = 4 * i + static_cast<std::size_t>(b);
      if (k >= width) {
        throw WidthError("value does not fit in " + std::to_string(width) + " bits", std::nullopt,
                         start + digits.size() - 1 - i);
      }
      out.set(width - 1 - k, true);
    }
  }
  return out;
}

// Uppercase, zero-padded to ceil(width/4) digits, no prefix.
inline std::string format_hex_word(const BitWord& bits) {
  static constexpr char kDigits[] = "0123456789ABCDEF";
  const std::size_t width = bits.width();
  const std::size_t ndigits = (width + 3) / 4;
  std::string out(ndigits, '0');
  for (std::size_t i = 0; i < ndigits; ++i) {
    int v = 0;
    for (int b = 0; b < 4; ++b) {
      const std::size_t k = 4 * i + static_cast<std::size_t>(b);
      if (k < width && bits[width - 1 - k]) v |= 1 << b;
    }
    out[ndigits - 1 - i] = kDigits[v];
  }
  return out;
}

}  // namespace apuf
