#pragma once

// PUF quality statistics. Hamming distances are normalized by the response
// width; population averages weight every instance (and every instance pair)
// equally.

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "apuf/bits.hpp"
#include "apuf/error.hpp"
#include "apuf/parallel.hpp"
#include "apuf/puf_core.hpp"
#include "apuf/rng.hpp"

namespace apuf {

namespace detail {

inline void require_challenges(std::span<const Challenge> challenges) {
  if (challenges.empty()) throw InvalidParameter("challenge set is empty");
}

template <PufInstance P>
std::vector<Response> responses(const P& puf, std::span<const Challenge> challenges) {
  std::vector<Response> out;
  out.reserve(challenges.size());
  for (const auto& c : challenges) out.push_back(respond(puf, c));
  return out;
}

}  // namespace detail

// `count` uniform challenges of the given width, challenge i drawn from
// derive_seed(seed, i).
inline std::vector<Challenge> random_challenges(std::size_t width, std::size_t count,
                                                std::uint64_t seed) {
  std::vector<Challenge> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, i));
    out.emplace_back(BitWord::uniform(width, rng));
  }
  return out;
}

// Fraction of 1 bits over all noise-free responses.
template <PufInstance P>
double uniformity(const P& puf, std::span<const Challenge> challenges) {
  detail::require_challenges(challenges);
  std::size_t ones = 0;
  for (const auto& c : challenges) ones += respond(puf, c).popcount();
  return static_cast<double>(ones) /
         static_cast<double>(challenges.size() * response_width(puf));
}

// Mean pairwise normalized inter-instance Hamming distance.
template <PufInstance P>
double uniqueness(std::span<const P> instances, std::span<const Challenge> challenges,
                  std::size_t threads = 1) {
  if (instances.size() < 2) throw InvalidParameter("uniqueness needs at least 2 instances");
  detail::require_challenges(challenges);
  const std::size_t k = instances.size();
  const std::size_t m = response_width(instances.front());
  for (const auto& p : instances) {
    if (response_width(p) != m || challenge_width(p) != challenge_width(instances.front())) {
      throw DimensionError("uniqueness needs instances of equal widths");
    }
  }
  std::vector<std::vector<Response>> table(k);
  parallel_for(k, threads, [&](std::size_t i) { table[i] = detail::responses(instances[i], challenges); });

  const double norm = static_cast<double>(challenges.size() * m);
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      std::size_t hd = 0;
      for (std::size_t t = 0; t < challenges.size(); ++t) {
        hd += hamming_distance(table[i][t], table[j][t]);
      }
      sum += static_cast<double>(hd) / norm;
    }
  }
  return 2.0 * sum / (static_cast<double>(k) * static_cast<double>(k - 1));
}

// 1 - mean normalized Hamming distance between the noise-free response and
// `repetitions` noisy re-evaluations. Repetition r of challenge t draws its
// noise from derive_seed(derive_seed(noise_seed, r), t), so sweeping the
// noise sigma with a fixed seed scales the same underlying draws.
template <PufInstance P>
double reliability(const P& puf, std::span<const Challenge> challenges, std::size_t repetitions,
                   std::uint64_t noise_seed) {
  detail::require_challenges(challenges);
  if (noise_sigma(puf) > 0.0 && repetitions < 2) {
    throw InvalidParameter("reliability needs at least 2 repetitions under noise");
  }
  if (noise_sigma(puf) == 0.0 || repetitions == 0) return 1.0;
  std::size_t hd = 0;
  for (std::size_t t = 0; t < challenges.size(); ++t) {
    const Response reference = respond(puf, challenges[t]);
    for (std::size_t r = 0; r < repetitions; ++r) {
      hd += hamming_distance(reference,
                             respond(puf, challenges[t], derive_seed(derive_seed(noise_seed, r), t)));
    }
  }
  const double norm =
      static_cast<double>(challenges.size() * repetitions * response_width(puf));
  return 1.0 - static_cast<double>(hd) / norm;
}

// Per response-bit position, the fraction of (instance, challenge)
// evaluations that produced 1.
template <PufInstance P>
std::vector<double> bit_aliasing(std::span<const P> instances,
                                 std::span<const Challenge> challenges) {
  if (instances.size() < 2) throw InvalidParameter("bit aliasing needs at least 2 instances");
  detail::require_challenges(challenges);
  const std::size_t m = response_width(instances.front());
  std::vector<std::size_t> ones(m, 0);
  for (const auto& p : instances) {
    if (response_width(p) != m) throw DimensionError("bit aliasing needs equal response widths");
    for (const auto& c : challenges) {
      const Response r = respond(p, c);
      for (std::size_t b = 0; b < m; ++b) ones[b] += r[b];
    }
  }
  std::vector<double> out(m);
  const double norm = static_cast<double>(instances.size() * challenges.size());
  for (std::size_t b = 0; b < m; ++b) out[b] = static_cast<double>(ones[b]) / norm;
  return out;
}

struct MetricsReport {
  double uniformity = 0.0;  // mean over instances
  std::optional<double> uniqueness;
  double reliability = 1.0;  // mean over instances
  std::vector<double> bit_aliasing;
  std::size_t instances = 0;
  std::size_t challenges = 0;
  std::size_t repetitions = 0;
  std::uint64_t challenge_seed = 0;
  std::uint64_t noise_seed = 0;
};

// Population report. Uniqueness and bit aliasing need k >= 2 and are left
// empty for a single instance.
template <PufInstance P>
MetricsReport measure(std::span<const P> instances, std::span<const Challenge> challenges,
                      std::size_t repetitions, std::uint64_t challenge_seed,
                      std::uint64_t noise_seed, std::size_t threads = 1) {
  if (instances.empty()) throw InvalidParameter("no instances to measure");
  detail::require_challenges(challenges);
  const std::size_t k = instances.size();
  std::vector<double> uni(k);
  std::vector<double> rel(k);
  parallel_for(k, threads, [&](std::size_t i) {
    uni[i] = uniformity(instances[i], challenges);
    rel[i] = reliability(instances[i], challenges, repetitions, derive_seed(noise_seed, i));
  });
  MetricsReport report;
  report.reliability = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    report.uniformity += uni[i];
    report.reliability += rel[i];
  }
  report.uniformity /= static_cast<double>(k);
  report.reliability /= static_cast<double>(k);
  if (k >= 2) {
    report.uniqueness = uniqueness(instances, challenges, threads);
    report.bit_aliasing = bit_aliasing(instances, challenges);
  }
  report.instances = k;
  report.challenges = challenges.size();
  report.repetitions = repetitions;
  report.challenge_seed = challenge_seed;
  report.noise_seed = noise_seed;
  return report;
}

inline std::string to_csv(const MetricsReport& r) {
  std::string out = "metric,value\n";
  char buf[96];
  auto line = [&](const char* name, double v) {
    std::snprintf(buf, sizeof buf, "%s,%.4f\n", name, v);
    out += buf;
  };
  line("uniformity", r.uniformity);
  if (r.uniqueness) line("uniqueness", *r.uniqueness);
  line("reliability", r.reliability);
  for (std::size_t b = 0; b < r.bit_aliasing.size(); ++b) {
    std::snprintf(buf, sizeof buf, "bit_aliasing_%zu,%.4f\n", b, r.bit_aliasing[b]);
    out += buf;
  }
  return out;
}

inline std::string to_table(const MetricsReport& r) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "instances=%zu challenges=%zu repetitions=%zu\n", r.instances,
                r.challenges, r.repetitions);
  out += buf;
  auto row = [&](const char* name, const std::string& value) {
    std::snprintf(buf, sizeof buf, "  %-14s %s\n", name, value.c_str());
    out += buf;
  };
  auto fmt = [&](double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.4f", v);
    return std::string(b);
  };
  row("uniformity", fmt(r.uniformity));
  row("uniqueness", r.uniqueness ? fmt(*r.uniqueness) : "n/a (k < 2)");
  row("reliability", fmt(r.reliability));
  if (!r.bit_aliasing.empty()) {
    double lo = r.bit_aliasing.front();
    double hi = lo;
    for (double v : r.bit_aliasing) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    row("bit aliasing", "min " + fmt(lo) + " max " + fmt(hi) + " over " +
                            std::to_string(r.bit_aliasing.size()) + " bits");
  }
  return out;
}

}  // namespace apuf
