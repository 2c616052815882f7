#pragma once

// Arbiter PUF simulation.
//
// A chain of n switch stages carries two racing edges. Stage i with select
// bit 0 passes them straight (top->top with d_tt, bottom->bottom with d_bb);
// with select bit 1 it crosses them (top->bottom with d_tb, bottom->top with
// d_bt). The arbiter outputs 1 when the edge on the top line arrives strictly
// first, i.e. when bottom - top > 0 after the last stage. Ties resolve to 0.
//
// The equivalent additive model writes the same delay difference as an inner
// product <w, phi(c)> with the parity vector of featurize.hpp; to_linear
// computes w from the stage delays.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "apuf/bits.hpp"
#include "apuf/error.hpp"
#include "apuf/featurize.hpp"
#include "apuf/rng.hpp"

namespace apuf {

struct StageDelays {
  double d_tt = 0.0;  // top in -> top out, select 0
  double d_bb = 0.0;  // bottom in -> bottom out, select 0
  double d_tb = 0.0;  // top in -> bottom out, select 1
  double d_bt = 0.0;  // bottom in -> top out, select 1

  // Difference the stage adds to (bottom - top) when straight / crossed.
  double straight_differential() const noexcept { return d_bb - d_tt; }
  double crossed_differential() const noexcept { return d_tb - d_bt; }

  bool finite() const noexcept {
    return std::isfinite(d_tt) && std::isfinite(d_bb) && std::isfinite(d_tb) &&
           std::isfinite(d_bt) && std::isfinite(straight_differential()) &&
           std::isfinite(crossed_differential());
  }

  friend bool operator==(const StageDelays&, const StageDelays&) = default;
};

struct DelayParams {
  double mean = 10.0;
  double sigma = 0.5;
};

class ArbiterChain {
 public:
  ArbiterChain(std::vector<StageDelays> stages, std::uint64_t seed = 0, double noise_sigma = 0.0)
      : stages_(std::move(stages)), seed_(seed), noise_sigma_(noise_sigma) {
    if (stages_.empty()) throw InvalidParameter("arbiter chain needs at least one stage");
    for (const auto& s : stages_) {
      if (!s.finite()) throw InvalidParameter("stage delays must be finite");
    }
    if (!(noise_sigma_ >= 0.0) || !std::isfinite(noise_sigma_)) {
      throw InvalidParameter("noise sigma must be finite and >= 0");
    }
  }

  std::size_t stages() const noexcept { return stages_.size(); }
  std::span<const StageDelays> delays() const noexcept { return stages_; }
  std::uint64_t seed() const noexcept { return seed_; }
  double noise_sigma() const noexcept { return noise_sigma_; }

  ArbiterChain with_noise(double sigma) const { return ArbiterChain(stages_, seed_, sigma); }

  friend bool operator==(const ArbiterChain&, const ArbiterChain&) = default;

 private:
  std::vector<StageDelays> stages_;
  std::uint64_t seed_;
  double noise_sigma_;
};

// Additive delay model: response = [<w, phi(c)> > 0], w.size() == n + 1.
struct LinearModel {
  std::vector<double> w;

  std::size_t stages() const noexcept { return w.empty() ? 0 : w.size() - 1; }
};

inline void check_delay_params(const DelayParams& params) {
  if (!(params.sigma > 0.0) || !std::isfinite(params.sigma) || !std::isfinite(params.mean)) {
    throw InvalidParameter("delay sigma must be finite and > 0, mean finite");
  }
}

// Draws all 4n delays i.i.d. Normal(mean, sigma^2) from the stream `seed`,
// stage by stage in the order d_tt, d_bb, d_tb, d_bt.
inline ArbiterChain sample_chain(std::size_t n, const DelayParams& params, std::uint64_t seed,
                                 double noise_sigma = 0.0) {
  if (n == 0) throw InvalidParameter("stage count must be >= 1");
  check_delay_params(params);
  Rng rng(seed);
  std::vector<StageDelays> stages(n);
  for (auto& s : stages) {
    s.d_tt = rng.normal(params.mean, params.sigma);
    s.d_bb = rng.normal(params.mean, params.sigma);
    s.d_tb = rng.normal(params.mean, params.sigma);
    s.d_bt = rng.normal(params.mean, params.sigma);
  }
  return ArbiterChain(std::move(stages), seed, noise_sigma);
}

namespace detail {

inline void check_width(std::size_t expected, const BitWord& c) {
  if (c.width() != expected) {
    throw DimensionError("challenge width " + std::to_string(c.width()) + " != stage count " +
                         std::to_string(expected));
  }
}

}  // namespace detail

// bottom - top arrival time after the last stage, noise-free.
inline double delay_difference(const ArbiterChain& chain, const BitWord& c) {
  detail::check_width(chain.stages(), c);
  double top = 0.0;
  double bottom = 0.0;
  const auto delays = chain.delays();
  for (std::size_t i = 0; i < delays.size(); ++i) {
    const StageDelays& s = delays[i];
    if (c[i]) {
      const double t = bottom + s.d_bt;
      bottom = top + s.d_tb;
      top = t;
    } else {
      top += s.d_tt;
      bottom += s.d_bb;
    }
  }
  return bottom - top;
}

// Arbiter decision by explicit propagation. With a noise seed and a nonzero
// noise sigma, one Normal(0, noise_sigma^2) draw from that stream is added to
// the final difference.
inline bool eval_brute(const ArbiterChain& chain, const BitWord& c,
                       std::optional<std::uint64_t> noise_seed = std::nullopt) {
  double delta = delay_difference(chain, c);
  if (noise_seed && chain.noise_sigma() > 0.0) {
    Rng rng(*noise_seed);
    delta += chain.noise_sigma() * rng.gaussian();
  }
  return delta > 0.0;
}

inline LinearModel to_linear(const ArbiterChain& chain) {
  const auto delays = chain.delays();
  const std::size_t n = delays.size();
  LinearModel m{std::vector<double>(n + 1, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    const double a = delays[i].straight_differential();
    const double b = delays[i].crossed_differential();
    m.w[i] += (a - b) / 2.0;
    m.w[i + 1] += (a + b) / 2.0;
  }
  return m;
}

inline double linear_response(const LinearModel& m, const BitWord& c) {
  detail::check_width(m.stages(), c);
  const FeatureVector f = phi(c);
  double acc = 0.0;
  for (std::size_t i = 0; i < f.values.size(); ++i) acc += m.w[i] * f.values[i];
  return acc;
}

inline bool eval_linear(const LinearModel& m, const BitWord& c) {
  return linear_response(m, c) > 0.0;
}

// N parallel chains of N stages each, all fed the same challenge; bit k of
// the response comes from chain k.
class MultiBitPuf {
 public:
  explicit MultiBitPuf(std::vector<ArbiterChain> chains) : chains_(std::move(chains)) {
    if (chains_.empty()) throw InvalidParameter("multi-bit PUF needs at least one chain");
    for (const auto& ch : chains_) {
      if (ch.stages() != chains_.size()) {
        throw InvalidParameter("every chain of an N-bit PUF must have N stages");
      }
    }
  }

  std::size_t width() const noexcept { return chains_.size(); }
  std::span<const ArbiterChain> chains() const noexcept { return chains_; }

  friend bool operator==(const MultiBitPuf&, const MultiBitPuf&) = default;

 private:
  std::vector<ArbiterChain> chains_;
};

// Chain k is sampled from derive_seed(seed, k).
inline MultiBitPuf sample_multibit(std::size_t n_bits, const DelayParams& params,
                                   std::uint64_t seed, double noise_sigma = 0.0) {
  if (n_bits == 0) throw InvalidParameter("response width must be >= 1");
  std::vector<ArbiterChain> chains;
  chains.reserve(n_bits);
  for (std::size_t k = 0; k < n_bits; ++k) {
    chains.push_back(sample_chain(n_bits, params, derive_seed(seed, k), noise_sigma));
  }
  return MultiBitPuf(std::move(chains));
}

// Chain k draws its noise from derive_seed(noise_seed, k).
inline Response eval_multibit(const MultiBitPuf& puf, const BitWord& c,
                              std::optional<std::uint64_t> noise_seed = std::nullopt) {
  detail::check_width(puf.width(), c);
  Response r(puf.width());
  const auto chains = puf.chains();
  for (std::size_t k = 0; k < chains.size(); ++k) {
    std::optional<std::uint64_t> seed;
    if (noise_seed) seed = derive_seed(*noise_seed, k);
    r.set(k, eval_brute(chains[k], c, seed));
  }
  return r;
}

// Uniform evaluation interface over both PUF kinds.
inline std::size_t challenge_width(const ArbiterChain& chain) { return chain.stages(); }
inline std::size_t challenge_width(const MultiBitPuf& puf) { return puf.width(); }
inline std::size_t response_width(const ArbiterChain&) { return 1; }
inline std::size_t response_width(const MultiBitPuf& puf) { return puf.width(); }
inline double noise_sigma(const ArbiterChain& chain) { return chain.noise_sigma(); }
inline double noise_sigma(const MultiBitPuf& puf) { return puf.chains().front().noise_sigma(); }

inline Response respond(const ArbiterChain& chain, const BitWord& c,
                        std::optional<std::uint64_t> noise_seed = std::nullopt) {
  Response r(1);
  r.set(0, eval_brute(chain, c, noise_seed));
  return r;
}

inline Response respond(const MultiBitPuf& puf, const BitWord& c,
                        std::optional<std::uint64_t> noise_seed = std::nullopt) {
  return eval_multibit(puf, c, noise_seed);
}

template <typename P>
concept PufInstance = requires(const P& p, const BitWord& c, std::optional<std::uint64_t> s) {
  { respond(p, c, s) } -> std::same_as<Response>;
  { challenge_width(p) } -> std::convertible_to<std::size_t>;
  { response_width(p) } -> std::convertible_to<std::size_t>;
  { noise_sigma(p) } -> std::convertible_to<double>;
};

}  // namespace apuf
