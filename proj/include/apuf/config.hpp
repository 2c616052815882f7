#pragma once

// Plain-text run configuration: UTF-8 lines `key = value`, '#' starts a
// comment. Every key is validated when it is set; unknown keys are errors.
// Command-line flags are applied after the file and so override it.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "apuf/error.hpp"
#include "apuf/featurize.hpp"

namespace apuf {

struct RunConfig {
  std::optional<std::size_t> stages;
  std::optional<std::size_t> chains;
  std::optional<std::size_t> count;
  std::optional<std::uint64_t> seed;
  std::optional<double> delay_mean;
  std::optional<double> delay_sigma;
  std::optional<double> noise_sigma;
  std::optional<FeatureMapKind> features;
  std::optional<double> test_fraction;
  std::optional<double> learning_rate;
  std::optional<std::size_t> epochs;
  std::optional<double> l2;
  std::optional<double> tol;
  std::optional<std::vector<std::size_t>> counts;
  std::optional<std::vector<double>> test_fractions;
  std::optional<std::size_t> instances;
  std::optional<std::size_t> challenges;
  std::optional<std::size_t> repetitions;
  std::optional<std::size_t> threads;
  std::optional<std::string> output;

  // Sets one key from its textual value. Throws InvalidParameter naming the
  // key on an unknown key or a malformed / out-of-range value.
  void set(std::string_view key, std::string_view value);

  static std::vector<std::string_view> keys();
};

namespace detail {

inline std::string_view strip(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1);
}

inline std::uint64_t parse_unsigned(std::string_view key, std::string_view text) {
  const std::string s(strip(text));
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw InvalidParameter(std::string(key) + ": expected a non-negative integer, got '" + s + "'");
  }
  try {
    return std::stoull(s);
  } catch (const std::out_of_range&) {
    throw InvalidParameter(std::string(key) + ": value out of range");
  }
}

inline std::size_t parse_positive(std::string_view key, std::string_view text) {
  const auto v = parse_unsigned(key, text);
  if (v == 0) throw InvalidParameter(std::string(key) + ": must be >= 1");
  return static_cast<std::size_t>(v);
}

inline double parse_real(std::string_view key, std::string_view text) {
  const std::string s(strip(text));
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (s.empty() || used != s.size() || !std::isfinite(v)) {
    throw InvalidParameter(std::string(key) + ": expected a finite real number, got '" + s + "'");
  }
  return v;
}

inline double parse_fraction(std::string_view key, std::string_view text) {
  const double v = parse_real(key, text);
  if (!(v > 0.0 && v < 1.0)) throw InvalidParameter(std::string(key) + ": must lie in (0, 1)");
  return v;
}

inline double parse_nonnegative(std::string_view key, std::string_view text) {
  const double v = parse_real(key, text);
  if (v < 0.0) throw InvalidParameter(std::string(key) + ": must be >= 0");
  return v;
}

inline double parse_strictly_positive(std::string_view key, std::string_view text) {
  const double v = parse_real(key, text);
  if (!(v > 0.0)) throw InvalidParameter(std::string(key) + ": must be > 0");
  return v;
}

template <typename Fn>
auto parse_list(std::string_view key, std::string_view text, Fn&& item) {
  std::vector<decltype(item(key, text))> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = std::min(text.find(',', pos), text.size());
    out.push_back(item(key, text.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return out;
}

}  // namespace detail

inline std::vector<std::string_view> RunConfig::keys() {
  return {"stages",        "chains",       "count",     "seed",         "delay_mean",
          "delay_sigma",   "noise_sigma",  "features",  "test_fraction", "learning_rate",
          "epochs",        "l2",           "tol",       "counts",       "test_fractions",
          "instances",     "challenges",   "repetitions", "threads",    "output"};
}

inline void RunConfig::set(std::string_view key, std::string_view value) {
  using namespace detail;
  value = strip(value);
  if (key == "stages" || key == "n") {
    stages = parse_positive(key, value);
  } else if (key == "chains") {
    chains = parse_positive(key, value);
  } else if (key == "count") {
    count = parse_positive(key, value);
  } else if (key == "seed") {
    seed = parse_unsigned(key, value);
  } else if (key == "delay_mean") {
    delay_mean = parse_real(key, value);
  } else if (key == "delay_sigma") {
    delay_sigma = parse_strictly_positive(key, value);
  } else if (key == "noise_sigma") {
    noise_sigma = parse_nonnegative(key, value);
  } else if (key == "features") {
    auto kind = parse_feature_map(value);
    if (!kind) {
      throw InvalidParameter("features: expected 'raw' or 'parity', got '" + std::string(value) + "'");
    }
    features = *kind;
  } else if (key == "test_fraction") {
    test_fraction = parse_fraction(key, value);
  } else if (key == "learning_rate") {
    learning_rate = parse_strictly_positive(key, value);
  } else if (key == "epochs") {
    epochs = parse_positive(key, value);
  } else if (key == "l2") {
    l2 = parse_nonnegative(key, value);
  } else if (key == "tol") {
    tol = parse_nonnegative(key, value);
  } else if (key == "counts") {
    counts = parse_list(key, value, parse_positive);
  } else if (key == "test_fractions") {
    test_fractions = parse_list(key, value, parse_fraction);
  } else if (key == "instances") {
    instances = parse_positive(key, value);
  } else if (key == "challenges") {
    challenges = parse_positive(key, value);
  } else if (key == "repetitions") {
    repetitions = parse_positive(key, value);
  } else if (key == "threads") {
    threads = parse_positive(key, value);
  } else if (key == "output") {
    if (value.empty()) throw InvalidParameter("output: path must not be empty");
    output = std::string(value);
  } else {
    throw InvalidParameter("unknown config key '" + std::string(key) + "'");
  }
}

// Applies every `key = value` line of `text` to `cfg`. Errors carry the line.
inline void apply_config_text(RunConfig& cfg, std::string_view text) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::strip(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidParameter("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      cfg.set(detail::strip(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const InvalidParameter& e) {
      throw InvalidParameter("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidParameter("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  RunConfig cfg;
  apply_config_text(cfg, buf.str());
  return cfg;
}

}  // namespace apuf
