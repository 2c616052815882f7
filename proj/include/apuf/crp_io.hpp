#pragma once

// Challenge-response datasets: in-memory form, the `puf-crp v1` text format,
// import of loose two-column rows with size-prefixed hex, and generation from
// simulated PUFs.
//
// File layout:
//
//   # puf-crp v1
//   # challenge_bits=<n> response_bits=<m>
//   # meta <key>=<value>          (zero or more)
//   challenge_hex,response_hex
//   <hex>,<hex>                   (one line per pair)

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "apuf/bits.hpp"
#include "apuf/error.hpp"
#include "apuf/parallel.hpp"
#include "apuf/puf_core.hpp"
#include "apuf/rng.hpp"

namespace apuf {

struct Crp {
  Challenge challenge;
  Response response;

  friend bool operator==(const Crp&, const Crp&) = default;
};

using Metadata = std::vector<std::pair<std::string, std::string>>;

class CrpDataset {
 public:
  CrpDataset(std::size_t challenge_width, std::size_t response_width, Metadata meta = {})
      : challenge_width_(challenge_width), response_width_(response_width), meta_(std::move(meta)) {
    if (challenge_width == 0 || response_width == 0) {
      throw InvalidParameter("dataset widths must be positive");
    }
  }

  std::size_t challenge_width() const noexcept { return challenge_width_; }
  std::size_t response_width() const noexcept { return response_width_; }
  std::size_t size() const noexcept { return pairs_.size(); }
  bool empty() const noexcept { return pairs_.empty(); }

  const std::vector<Crp>& pairs() const noexcept { return pairs_; }
  const Crp& operator[](std::size_t i) const { return pairs_[i]; }

  const Metadata& meta() const noexcept { return meta_; }
  std::optional<std::string> meta_value(std::string_view key) const {
    for (const auto& [k, v] : meta_) {
      if (k == key) return v;
    }
    return std::nullopt;
  }
  void set_meta(std::string key, std::string value) {
    for (auto& [k, v] : meta_) {
      if (k == key) {
        v = std::move(value);
        return;
      }
    }
    meta_.emplace_back(std::move(key), std::move(value));
  }

  void push_back(Crp crp) {
    if (crp.challenge.width() != challenge_width_ || crp.response.width() != response_width_) {
      throw DimensionError("pair widths do not match dataset widths");
    }
    pairs_.push_back(std::move(crp));
  }
  void reserve(std::size_t n) { pairs_.reserve(n); }

  // Same widths and metadata, pairs selected by index.
  CrpDataset subset(std::span<const std::size_t> indices) const {
    CrpDataset out(challenge_width_, response_width_, meta_);
    out.reserve(indices.size());
    for (std::size_t i : indices) out.pairs_.push_back(pairs_.at(i));
    return out;
  }

  CrpDataset prefix(std::size_t count) const {
    if (count > pairs_.size()) throw InvalidParameter("prefix longer than dataset");
    CrpDataset out(challenge_width_, response_width_, meta_);
    out.pairs_.assign(pairs_.begin(), pairs_.begin() + static_cast<std::ptrdiff_t>(count));
    return out;
  }

  friend bool operator==(const CrpDataset&, const CrpDataset&) = default;

 private:
  std::size_t challenge_width_;
  std::size_t response_width_;
  Metadata meta_;
  std::vector<Crp> pairs_;
};

inline constexpr std::string_view kFormatMagic = "# puf-crp v1";
inline constexpr std::string_view kColumnHeader = "challenge_hex,response_hex";

inline void write_dataset(const CrpDataset& ds, std::ostream& out) {
  out << kFormatMagic << '\n'
      << "# challenge_bits=" << ds.challenge_width() << " response_bits=" << ds.response_width()
      << '\n';
  for (const auto& [k, v] : ds.meta()) out << "# meta " << k << '=' << v << '\n';
  out << kColumnHeader << '\n';
  for (const auto& crp : ds.pairs()) {
    out << format_hex_word(crp.challenge) << ',' << format_hex_word(crp.response) << '\n';
  }
}

inline void write_dataset(const CrpDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  write_dataset(ds, out);
  if (!out) throw Error("write to " + path + " failed");
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::size_t parse_width_field(std::string_view field, std::string_view key,
                                     std::size_t line) {
  if (field.substr(0, key.size()) != key || field.size() <= key.size() ||
      field[key.size()] != '=') {
    throw ParseError("expected '" + std::string(key) + "=<bits>'", line);
  }
  const std::string digits(field.substr(key.size() + 1));
  if (digits.empty() || digits.size() > 9 ||
      digits.find_first_not_of("0123456789") != std::string::npos) {
    throw ParseError("invalid bit count '" + digits + "'", line);
  }
  const std::size_t value = std::stoul(digits);
  if (value == 0) throw ParseError("bit count must be positive", line);
  return value;
}

// Rethrows a word-level error with the line number attached.
template <typename Fn>
auto at_line(std::size_t line, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const WidthError& e) {
    throw WidthError(e.message(), line, e.offset());
  } catch (const ParseError& e) {
    throw ParseError(e.message(), line, e.offset());
  }
}

inline Crp parse_pair(std::string_view challenge_text, std::string_view response_text,
                      std::size_t challenge_width, std::size_t response_width) {
  Challenge c(parse_hex_word(challenge_text, challenge_width));
  Response r(parse_hex_word(response_text, response_width));
  return Crp{std::move(c), std::move(r)};
}

}  // namespace detail

inline CrpDataset read_dataset(std::istream& in) {
  std::string raw_line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::optional<std::string_view> {
    if (!std::getline(in, raw_line)) return std::nullopt;
    ++line_no;
    return detail::trim(raw_line);
  };

  auto magic = next_line();
  if (!magic || *magic != kFormatMagic) {
    throw ParseError("missing '" + std::string(kFormatMagic) + "' header", std::size_t{1});
  }

  auto widths = next_line();
  if (!widths || widths->substr(0, 2) != "# ") {
    throw ParseError("missing '# challenge_bits=<n> response_bits=<m>' header", line_no + !widths);
  }
  std::string_view fields = widths->substr(2);
  const auto space = fields.find(' ');
  if (space == std::string_view::npos) {
    throw ParseError("expected challenge_bits and response_bits", line_no);
  }
  const std::size_t cw = detail::parse_width_field(fields.substr(0, space), "challenge_bits", line_no);
  const std::size_t rw =
      detail::parse_width_field(detail::trim(fields.substr(space + 1)), "response_bits", line_no);

  CrpDataset ds(cw, rw);
  bool seen_columns = false;
  while (auto line = next_line()) {
    if (line->empty()) continue;
    if (!seen_columns) {
      if (line->substr(0, 7) == "# meta ") {
        const std::string_view kv = line->substr(7);
        const auto eq = kv.find('=');
        if (eq == std::string_view::npos || eq == 0) {
          throw ParseError("metadata line must be '# meta <key>=<value>'", line_no);
        }
        ds.set_meta(std::string(kv.substr(0, eq)), std::string(kv.substr(eq + 1)));
        continue;
      }
      if (*line == kColumnHeader) {
        seen_columns = true;
        continue;
      }
      throw ParseError("expected metadata or '" + std::string(kColumnHeader) + "'", line_no);
    }
    if (*line == kColumnHeader) throw ParseError("duplicate column header", line_no);
    const auto comma = line->find(',');
    if (comma == std::string_view::npos || line->find(',', comma + 1) != std::string_view::npos) {
      throw ParseError("expected '<challenge_hex>,<response_hex>'", line_no);
    }
    ds.push_back(detail::at_line(line_no, [&] {
      return detail::parse_pair(detail::trim(line->substr(0, comma)),
                                detail::trim(line->substr(comma + 1)), cw, rw);
    }));
  }
  if (!seen_columns) {
    throw ParseError("missing '" + std::string(kColumnHeader) + "' column header", line_no + 1);
  }
  return ds;
}

inline CrpDataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_dataset(in);
}

struct RowRejection {
  std::size_t line;
  std::string message;
};

struct ImportResult {
  CrpDataset dataset;
  std::vector<RowRejection> rejections;
};

// Imports loosely formatted rows "<challenge> <response>" (whitespace or
// comma separated, Verilog size prefixes allowed) with caller-given widths.
// A malformed row is skipped and reported; accepted rows are unaffected.
// Blank lines, '#' comments and a "CHALLENGES RESPONSES" title row are
// ignored.
inline ImportResult import_rows(std::istream& in, std::size_t challenge_width,
                                std::size_t response_width) {
  ImportResult result{CrpDataset(challenge_width, response_width, {{"source", "import"}}), {}};
  std::string raw_line;
  std::size_t line_no = 0;
  while (std::getline(in, raw_line)) {
    ++line_no;
    const std::string_view line = detail::trim(raw_line);
    if (line.empty() || line.front() == '#') continue;

    std::vector<std::string_view> tokens;
    std::size_t pos = 0;
    while (pos < line.size()) {
      const auto start = line.find_first_not_of(" \t,", pos);
      if (start == std::string_view::npos) break;
      const auto end = std::min(line.find_first_of(" \t,", start), line.size());
      tokens.push_back(line.substr(start, end - start));
      pos = end;
    }
    if (tokens.size() == 2 && (tokens[0] == "CHALLENGES" || tokens[0] == "challenges")) continue;
    if (tokens.size() != 2) {
      result.rejections.push_back({line_no, "line " + std::to_string(line_no) +
                                                ": expected two columns, found " +
                                                std::to_string(tokens.size())});
      continue;
    }
    try {
      result.dataset.push_back(
          detail::at_line(line_no, [&] {
            return detail::parse_pair(tokens[0], tokens[1], challenge_width, response_width);
          }));
    } catch (const ParseError& e) {
      result.rejections.push_back({line_no, e.what()});
    }
  }
  return result;
}

// Samples `count` uniform challenges (challenge i from the stream
// derive_seed(challenge_seed, i)) and records the PUF's responses. Noisy
// evaluation of pair i uses derive_seed(noise_seed, i).
template <PufInstance P>
CrpDataset generate_dataset(const P& puf, std::size_t count, std::uint64_t challenge_seed,
                            std::optional<std::uint64_t> noise_seed = std::nullopt,
                            std::size_t threads = 1) {
  if (count == 0) throw InvalidParameter("CRP count must be >= 1");
  const std::size_t cw = challenge_width(puf);
  std::vector<Crp> pairs(count);
  parallel_for(count, threads, [&](std::size_t i) {
    Rng rng(derive_seed(challenge_seed, i));
    Challenge c(BitWord::uniform(cw, rng));
    std::optional<std::uint64_t> ns;
    if (noise_seed) ns = derive_seed(*noise_seed, i);
    Response r = respond(puf, c, ns);
    pairs[i] = Crp{std::move(c), std::move(r)};
  });
  CrpDataset ds(cw, response_width(puf));
  ds.reserve(count);
  for (auto& p : pairs) ds.push_back(std::move(p));
  return ds;
}

// A simulated device fully described by a handful of numbers. chains == 1 is
// a classical arbiter chain of `stages` stages; chains > 1 is the N-bit
// design, which requires stages == chains.
struct SimulationSpec {
  std::size_t stages = 64;
  std::size_t chains = 1;
  DelayParams delays{};
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  bool multibit() const noexcept { return chains > 1; }

  void validate() const {
    if (stages == 0 || chains == 0) throw InvalidParameter("stages and chains must be >= 1");
    if (multibit() && stages != chains) {
      throw InvalidParameter("an N-bit design needs stages == chains (got " +
                             std::to_string(stages) + " stages, " + std::to_string(chains) +
                             " chains)");
    }
    check_delay_params(delays);
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
      throw InvalidParameter("noise sigma must be finite and >= 0");
    }
  }

  // Sub-streams of the master seed.
  std::uint64_t puf_seed() const noexcept { return derive_seed(seed, 0); }
  std::uint64_t challenge_seed() const noexcept { return derive_seed(seed, 1); }
  std::uint64_t noise_seed() const noexcept { return derive_seed(seed, 2); }
};

using SimulatedPuf = std::variant<ArbiterChain, MultiBitPuf>;

inline SimulatedPuf build_puf(const SimulationSpec& spec) {
  spec.validate();
  if (spec.multibit()) {
    return sample_multibit(spec.chains, spec.delays, spec.puf_seed(), spec.noise_sigma);
  }
  return sample_chain(spec.stages, spec.delays, spec.puf_seed(), spec.noise_sigma);
}

namespace detail {

// Shortest text that reads back as the same double.
inline std::string format_real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline Metadata describe(const SimulationSpec& spec) {
  return {{"kind", spec.multibit() ? "multibit" : "apuf"},
          {"stages", std::to_string(spec.stages)},
          {"chains", std::to_string(spec.chains)},
          {"delay_mean", detail::format_real(spec.delays.mean)},
          {"delay_sigma", detail::format_real(spec.delays.sigma)},
          {"noise_sigma", detail::format_real(spec.noise_sigma)},
          {"seed", std::to_string(spec.seed)}};
}

// Inverse of describe(); throws ParseError when a key is missing or invalid.
inline SimulationSpec spec_from_metadata(const CrpDataset& ds) {
  auto get = [&](std::string_view key) {
    auto v = ds.meta_value(key);
    if (!v) throw ParseError("dataset metadata lacks '" + std::string(key) + "'");
    return *v;
  };
  try {
    SimulationSpec spec;
    spec.stages = std::stoul(get("stages"));
    spec.chains = std::stoul(get("chains"));
    spec.delays.mean = std::stod(get("delay_mean"));
    spec.delays.sigma = std::stod(get("delay_sigma"));
    spec.noise_sigma = std::stod(get("noise_sigma"));
    spec.seed = std::stoull(get("seed"));
    spec.validate();
    return spec;
  } catch (const std::logic_error& e) {
    throw ParseError(std::string("invalid dataset metadata: ") + e.what());
  } catch (const InvalidParameter& e) {
    throw ParseError(std::string("invalid dataset metadata: ") + e.what());
  }
}

inline CrpDataset generate_dataset(const SimulationSpec& spec, std::size_t count,
                                   std::size_t threads = 1) {
  const SimulatedPuf puf = build_puf(spec);
  CrpDataset ds = std::visit(
      [&](const auto& p) {
        return generate_dataset(p, count, spec.challenge_seed(), spec.noise_seed(), threads);
      },
      puf);
  for (auto& [k, v] : describe(spec)) ds.set_meta(k, v);
  return ds;
}

}  // namespace apuf
