#pragma once

// Challenge encodings for the modeling attack. Both maps send bit 0 to +1 and
// bit 1 to -1 and append a constant +1 bias coordinate, so either produces an
// (n+1)-vector of +-1 entries.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "apuf/bits.hpp"
#include "apuf/error.hpp"

namespace apuf {

enum class FeatureMapKind { RawBits, Parity };

constexpr std::string_view to_string(FeatureMapKind kind) noexcept {
  return kind == FeatureMapKind::Parity ? "parity" : "raw";
}

inline std::optional<FeatureMapKind> parse_feature_map(std::string_view name) noexcept {
  if (name == "raw") return FeatureMapKind::RawBits;
  if (name == "parity") return FeatureMapKind::Parity;
  return std::nullopt;
}

struct FeatureVector {
  std::vector<double> values;
  FeatureMapKind kind = FeatureMapKind::Parity;
  std::size_t n = 0;
};

// Writes the n+1 features of `c` into `out`.
inline void encode_features(FeatureMapKind kind, const BitWord& c, std::span<double> out) {
  const std::size_t n = c.width();
  if (out.size() != n + 1) throw DimensionError("feature buffer must hold width + 1 entries");
  out[n] = 1.0;
  if (kind == FeatureMapKind::RawBits) {
    for (std::size_t i = 0; i < n; ++i) out[i] = c[i] ? -1.0 : 1.0;
    return;
  }
  // Suffix products: phi_i = prod_{j >= i} (1 - 2 c_j).
  double acc = 1.0;
  for (std::size_t i = n; i-- > 0;) {
    if (c[i]) acc = -acc;
    out[i] = acc;
  }
}

inline FeatureVector make_features(FeatureMapKind kind, const BitWord& c) {
  FeatureVector f{std::vector<double>(c.width() + 1), kind, c.width()};
  encode_features(kind, c, f.values);
  return f;
}

inline FeatureVector phi(const BitWord& c) { return make_features(FeatureMapKind::Parity, c); }
inline FeatureVector raw(const BitWord& c) { return make_features(FeatureMapKind::RawBits, c); }

}  // namespace apuf
