#pragma once

// Logistic-regression modeling attack.
//
// Training is full-batch gradient descent on the mean cross-entropy with an
// optional ridge term, starting from theta = 0. The last feature column is
// the constant bias and is never penalized. Every multi-bit attack trains one
// independent model per response bit and scores them on a shared test split.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "apuf/bits.hpp"
#include "apuf/crp_io.hpp"
#include "apuf/error.hpp"
#include "apuf/featurize.hpp"
#include "apuf/parallel.hpp"
#include "apuf/rng.hpp"

namespace apuf {

// 1 / (1 + e^-z), evaluated so that exp() only ever sees a non-positive
// argument.
inline double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^x) without overflow.
inline double softplus(double x) noexcept {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

struct LrHyperParams {
  double learning_rate = 0.05;
  std::size_t epochs = 500;
  double l2 = 0.0;
  double tol = 1e-7;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw InvalidParameter("learning rate must be > 0");
    }
    if (epochs == 0) throw InvalidParameter("epochs must be >= 1");
    if (!(l2 >= 0.0) || !std::isfinite(l2)) throw InvalidParameter("l2 must be >= 0");
    if (!(tol >= 0.0) || !std::isfinite(tol)) throw InvalidParameter("tol must be >= 0");
  }
};

// Dense row-major m x d design matrix.
class FeatureMatrix {
 public:
  FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  static FeatureMatrix encode(FeatureMapKind kind, std::span<const Crp> pairs) {
    if (pairs.empty()) return FeatureMatrix(0, 0);
    const std::size_t n = pairs.front().challenge.width();
    FeatureMatrix x(pairs.size(), n + 1);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      encode_features(kind, pairs[i].challenge, x.row(i));
    }
    return x;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

struct TrainingMeta {
  std::size_t epochs_run = 0;
  double final_loss = 0.0;
  // Loss at theta_0, theta_1, ... up to and including the returned theta.
  std::vector<double> loss_history;
};

struct LrFit {
  std::vector<double> theta;
  TrainingMeta meta;
};

namespace detail {

inline void check_training_set(const FeatureMatrix& x, std::span<const std::uint8_t> y) {
  if (x.rows() == 0) throw InvalidParameter("training set is empty");
  if (x.cols() == 0) throw InvalidParameter("feature dimension must be >= 1");
  if (y.size() != x.rows()) {
    throw InvalidParameter("label count " + std::to_string(y.size()) + " != row count " +
                           std::to_string(x.rows()));
  }
  for (std::uint8_t label : y) {
    if (label > 1) throw InvalidParameter("labels must be 0 or 1");
  }
}

// Signs of a design matrix whose entries are all +1 or -1, packed four to a
// nibble (bit set = -1): by_row groups columns 4c..4c+3 of each row, by_block
// groups rows 4q..4q+3 of each column.
struct SignPatterns {
  std::size_t chunks = 0;
  std::vector<std::uint8_t> by_row;    // rows x chunks
  std::vector<std::uint8_t> by_block;  // ceil(rows / 4) x cols
};

inline std::optional<SignPatterns> sign_patterns(const FeatureMatrix& x) {
  const std::size_t m = x.rows();
  const std::size_t d = x.cols();
  SignPatterns s;
  s.chunks = (d + 3) / 4;
  s.by_row.assign(m * s.chunks, 0);
  s.by_block.assign((m + 3) / 4 * d, 0);
  for (std::size_t i = 0; i < m; ++i) {
    const auto xi = x.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      if (xi[j] == 1.0) continue;
      if (xi[j] != -1.0) return std::nullopt;
      s.by_row[i * s.chunks + j / 4] |= static_cast<std::uint8_t>(1U << (j % 4));
      s.by_block[i / 4 * d + j] |= static_cast<std::uint8_t>(1U << (i % 4));
    }
  }
  return s;
}

// Losses and gradients for `bits` independent models sharing one design
// matrix. Labels are row-major m x bits, theta and grad row-major d x bits,
// so the innermost loops run across models, and no model's arithmetic
// depends on how many others share the pass.
//
// Rows go through in blocks of four. With sign patterns, logits are sums of
// precomputed signed partial sums of theta over four columns, and each
// block's gradient contribution is a lookup into the 16 signed sums of its
// four residual rows. Otherwise plain tiled products are used.
inline void batch_loss_and_gradient(const FeatureMatrix& x, const SignPatterns* signs,
                                    std::span<const std::uint8_t> y, std::size_t bits,
                                    std::span<const double> theta, double l2,
                                    std::span<double> loss, std::span<double> grad) {
  constexpr std::size_t kTile = 4;
  constexpr std::size_t kWide = 2 * kTile;
  constexpr std::size_t kPatterns = 16;
  // log(1 + e^-|z|) is accumulated as a running product of factors in
  // (1, 2], folded through one log() every kFold rows.
  constexpr std::size_t kFold = 64;
  const std::size_t m = x.rows();
  const std::size_t d = x.cols();
  const double* th = theta.data();
  std::fill(loss.begin(), loss.end(), 0.0);
  std::fill(grad.begin(), grad.end(), 0.0);
  std::vector<double> z(kTile * bits);
  std::vector<double> r(kTile * bits);
  std::vector<double> prod(bits, 1.0);
  std::vector<double> logs(bits, 0.0);

  std::vector<double> partial;  // chunks x 16 x bits
  std::vector<double> combos;   // 16 x bits
  if (signs) {
    partial.assign(signs->chunks * kPatterns * bits, 0.0);
    for (std::size_t c = 0; c < signs->chunks; ++c) {
      for (std::size_t p = 0; p < kPatterns; ++p) {
        double* out = partial.data() + (c * kPatterns + p) * bits;
        for (std::size_t t = 0; t < kTile && 4 * c + t < d; ++t) {
          const double sign = (p >> t) & 1U ? -1.0 : 1.0;
          const double* tj = th + (4 * c + t) * bits;
          for (std::size_t b = 0; b < bits; ++b) out[b] += sign * tj[b];
        }
      }
    }
    combos.resize(kPatterns * bits);
  }

  for (std::size_t i0 = 0; i0 < m; i0 += kTile) {
    const std::size_t rows = std::min(kTile, m - i0);
    const double* xr[kTile];
    for (std::size_t k = 0; k < kTile; ++k) xr[k] = x.row(i0 + std::min(k, rows - 1)).data();

    if (signs) {
      for (std::size_t k = 0; k < rows; ++k) {
        double* zk = z.data() + k * bits;
        std::fill(zk, zk + bits, 0.0);
        const std::uint8_t* pat = signs->by_row.data() + (i0 + k) * signs->chunks;
        for (std::size_t c = 0; c < signs->chunks; ++c) {
          const double* src = partial.data() + (c * kPatterns + pat[c]) * bits;
          for (std::size_t b = 0; b < bits; ++b) zk[b] += src[b];
        }
      }
    } else {
      std::size_t b = 0;
      for (; b + kTile <= bits; b += kTile) {
        double acc[kTile][kTile] = {};
        for (std::size_t j = 0; j < d; ++j) {
          const double* t = th + j * bits + b;
          for (std::size_t k = 0; k < kTile; ++k) {
            const double a = xr[k][j];
            for (std::size_t q = 0; q < kTile; ++q) acc[k][q] += a * t[q];
          }
        }
        for (std::size_t k = 0; k < kTile; ++k) {
          for (std::size_t q = 0; q < kTile; ++q) z[k * bits + b + q] = acc[k][q];
        }
      }
      for (; b < bits; ++b) {
        for (std::size_t k = 0; k < kTile; ++k) {
          double acc = 0.0;
          for (std::size_t j = 0; j < d; ++j) acc += xr[k][j] * th[j * bits + b];
          z[k * bits + b] = acc;
        }
      }
    }

    for (std::size_t k = 0; k < rows; ++k) {
      const std::uint8_t* yi = y.data() + (i0 + k) * bits;
      const double* zk = z.data() + k * bits;
      double* rk = r.data() + k * bits;
      for (std::size_t c = 0; c < bits; ++c) {
        // One exponential serves both the softplus and the sigmoid.
        const double e = std::exp(-std::abs(zk[c]));
        const double signed_z = yi[c] ? -zk[c] : zk[c];
        loss[c] += std::max(signed_z, 0.0);
        prod[c] *= 1.0 + e;
        const double p = zk[c] >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
        rk[c] = p - static_cast<double>(yi[c]);
      }
    }
    if ((i0 + kTile) % kFold == 0 || i0 + kTile >= m) {
      for (std::size_t c = 0; c < bits; ++c) {
        logs[c] += std::log(prod[c]);
        prod[c] = 1.0;
      }
    }
    if (grad.empty()) continue;
    // Padding rows of a short final block add exact zeros.
    std::fill(r.begin() + static_cast<std::ptrdiff_t>(rows * bits), r.end(), 0.0);

    if (signs) {
      const double* r0 = r.data();
      const double* r1 = r0 + bits;
      const double* r2 = r1 + bits;
      const double* r3 = r2 + bits;
      for (std::size_t p = 0; p < kPatterns; ++p) {
        const double s0 = p & 1U ? -1.0 : 1.0;
        const double s1 = p & 2U ? -1.0 : 1.0;
        const double s2 = p & 4U ? -1.0 : 1.0;
        const double s3 = p & 8U ? -1.0 : 1.0;
        double* out = combos.data() + p * bits;
        for (std::size_t b = 0; b < bits; ++b) {
          out[b] = s0 * r0[b] + s1 * r1[b] + s2 * r2[b] + s3 * r3[b];
        }
      }
      const std::uint8_t* pat = signs->by_block.data() + i0 / kTile * d;
      for (std::size_t j = 0; j < d; ++j) {
        const double* src = combos.data() + pat[j] * bits;
        double* g = grad.data() + j * bits;
        for (std::size_t b = 0; b < bits; ++b) g[b] += src[b];
      }
      continue;
    }

    std::size_t b = 0;
    for (; b + kWide <= bits; b += kWide) {
      double res[kTile][kWide];
      for (std::size_t k = 0; k < kTile; ++k) {
        for (std::size_t q = 0; q < kWide; ++q) res[k][q] = r[k * bits + b + q];
      }
      for (std::size_t j = 0; j < d; ++j) {
        double* g = grad.data() + j * bits + b;
        const double a0 = xr[0][j], a1 = xr[1][j], a2 = xr[2][j], a3 = xr[3][j];
        for (std::size_t q = 0; q < kWide; ++q) {
          double v = g[q];
          v += res[0][q] * a0;
          v += res[1][q] * a1;
          v += res[2][q] * a2;
          v += res[3][q] * a3;
          g[q] = v;
        }
      }
    }
    for (; b < bits; ++b) {
      for (std::size_t j = 0; j < d; ++j) {
        double v = grad[j * bits + b];
        for (std::size_t k = 0; k < kTile; ++k) v += r[k * bits + b] * xr[k][j];
        grad[j * bits + b] = v;
      }
    }
  }

  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t b = 0; b < bits; ++b) {
    double penalty = 0.0;
    for (std::size_t j = 0; j + 1 < d; ++j) penalty += theta[j * bits + b] * theta[j * bits + b];
    loss[b] = (loss[b] + logs[b]) * inv_m + 0.5 * l2 * inv_m * penalty;
  }
  if (grad.empty()) return;
  for (double& g : grad) g *= inv_m;
  for (std::size_t j = 0; j + 1 < d; ++j) {
    for (std::size_t b = 0; b < bits; ++b) grad[j * bits + b] += l2 * inv_m * theta[j * bits + b];
  }
}

inline double loss_and_gradient(const FeatureMatrix& x, std::span<const std::uint8_t> y,
                                std::span<const double> theta, double l2, std::span<double> grad) {
  const auto signs = sign_patterns(x);
  double loss = 0.0;
  batch_loss_and_gradient(x, signs ? &*signs : nullptr, y, 1, theta, l2,
                          std::span<double>(&loss, 1), grad);
  return loss;
}

}  // namespace detail

// Regularized mean cross-entropy at theta.
inline double lr_loss(const FeatureMatrix& x, std::span<const std::uint8_t> y,
                      std::span<const double> theta, double l2 = 0.0) {
  detail::check_training_set(x, y);
  if (theta.size() != x.cols()) throw DimensionError("theta size != feature dimension");
  return detail::loss_and_gradient(x, y, theta, l2, {});
}

inline std::vector<double> lr_gradient(const FeatureMatrix& x, std::span<const std::uint8_t> y,
                                       std::span<const double> theta, double l2 = 0.0) {
  detail::check_training_set(x, y);
  if (theta.size() != x.cols()) throw DimensionError("theta size != feature dimension");
  std::vector<double> grad(x.cols());
  detail::loss_and_gradient(x, y, theta, l2, grad);
  return grad;
}

// Trains `bits` models at once on labels laid out row-major m x bits. Each
// model runs at most hp.epochs descent steps and stops early when a step
// lowers its loss by less than hp.tol; the others carry on.
inline std::vector<LrFit> train_lr_batch(const FeatureMatrix& x, std::span<const std::uint8_t> y,
                                         std::size_t bits, const LrHyperParams& hp) {
  hp.validate();
  if (bits == 0) return {};
  if (y.size() != x.rows() * bits) {
    throw InvalidParameter("label count " + std::to_string(y.size()) + " != " +
                           std::to_string(x.rows()) + " rows x " + std::to_string(bits) + " bits");
  }
  if (x.rows() == 0) throw InvalidParameter("training set is empty");
  if (x.cols() == 0) throw InvalidParameter("feature dimension must be >= 1");
  for (std::uint8_t label : y) {
    if (label > 1) throw InvalidParameter("labels must be 0 or 1");
  }
  const std::size_t d = x.cols();
  std::vector<double> theta(d * bits, 0.0);
  std::vector<double> grad(d * bits);
  std::vector<double> loss(bits);
  const auto signs = detail::sign_patterns(x);
  std::vector<LrFit> fits(bits);
  std::vector<bool> active(bits, true);
  std::size_t remaining = bits;
  for (auto& f : fits) f.meta.loss_history.reserve(hp.epochs + 1);

  for (std::size_t step = 0; remaining > 0; ++step) {
    detail::batch_loss_and_gradient(x, signs ? &*signs : nullptr, y, bits, theta, hp.l2, loss, grad);
    for (std::size_t b = 0; b < bits; ++b) {
      if (!active[b]) continue;
      auto& history = fits[b].meta.loss_history;
      history.push_back(loss[b]);
      if ((step > 0 && history[step - 1] - loss[b] < hp.tol) || step == hp.epochs) {
        active[b] = false;
        --remaining;
        continue;
      }
      for (std::size_t j = 0; j < d; ++j) theta[j * bits + b] -= hp.learning_rate * grad[j * bits + b];
      fits[b].meta.epochs_run = step + 1;
    }
  }
  for (std::size_t b = 0; b < bits; ++b) {
    fits[b].theta.resize(d);
    for (std::size_t j = 0; j < d; ++j) fits[b].theta[j] = theta[j * bits + b];
    fits[b].meta.final_loss = fits[b].meta.loss_history.back();
  }
  return fits;
}

inline LrFit train_lr(const FeatureMatrix& x, std::span<const std::uint8_t> y,
                      const LrHyperParams& hp) {
  hp.validate();
  detail::check_training_set(x, y);
  return std::move(train_lr_batch(x, y, 1, hp).front());
}

struct LrModel {
  std::vector<double> theta;
  FeatureMapKind kind = FeatureMapKind::Parity;
  std::size_t n = 0;
  TrainingMeta meta;
};

struct Prediction {
  bool bit = false;
  double probability = 0.5;
};

inline double decision_value(const LrModel& model, const BitWord& c) {
  if (c.width() != model.n || model.theta.size() != model.n + 1) {
    throw DimensionError("challenge width " + std::to_string(c.width()) +
                         " does not match model width " + std::to_string(model.n));
  }
  std::vector<double> f(model.n + 1);
  encode_features(model.kind, c, f);
  double z = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) z += model.theta[j] * f[j];
  return z;
}

// Predicts 1 iff p > 0.5, decided on the logit (z > 0) so that margins too
// small to move sigmoid(z) off 0.5 in floating point still resolve.
inline Prediction predict(const LrModel& model, const BitWord& c) {
  const double z = decision_value(model, c);
  return {z > 0.0, sigmoid(z)};
}

// Fits a model for response bit `bit` of every pair.
inline LrModel train_model(std::span<const Crp> pairs, std::size_t bit, FeatureMapKind kind,
                           const LrHyperParams& hp) {
  if (pairs.empty()) throw InvalidParameter("training set is empty");
  const FeatureMatrix x = FeatureMatrix::encode(kind, pairs);
  std::vector<std::uint8_t> y(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) y[i] = pairs[i].response[bit];
  LrFit fit = train_lr(x, y, hp);
  return {std::move(fit.theta), kind, pairs.front().challenge.width(), std::move(fit.meta)};
}

// Seeded random partition. The test part has floor(fraction * size) pairs,
// at least one; both parts keep the original pair order.
inline std::pair<CrpDataset, CrpDataset> split(const CrpDataset& ds, double test_fraction,
                                               std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InvalidParameter("test fraction must lie in (0, 1)");
  }
  if (ds.size() < 2) throw InvalidParameter("cannot split a dataset of fewer than 2 pairs");

  const std::size_t m = ds.size();
  // The epsilon absorbs representation error in products such as 0.35 * 100.
  const auto floored = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(m) + 1e-9));
  const std::size_t test_size = std::clamp<std::size_t>(floored, 1, m - 1);

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = m - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

  std::vector<std::size_t> test_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(test_size));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(test_size), order.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  return {ds.subset(train_idx), ds.subset(test_idx)};
}

struct RateSummary {
  std::vector<double> per_bit_rate;
  double mean_rate = 0.0;
  double word_exact_rate = 0.0;
};

// models[k] predicts response bit k. A rate is the fraction of test pairs
// predicted correctly.
inline RateSummary prediction_rate(std::span<const LrModel> models, const CrpDataset& test) {
  if (test.empty()) throw InvalidParameter("test set is empty");
  if (models.size() != test.response_width()) {
    throw DimensionError("need one model per response bit (" +
                         std::to_string(test.response_width()) + "), got " +
                         std::to_string(models.size()));
  }
  const std::size_t bits = models.size();
  std::vector<std::size_t> correct(bits, 0);
  std::size_t exact = 0;
  for (const Crp& crp : test.pairs()) {
    bool all = true;
    for (std::size_t k = 0; k < bits; ++k) {
      const bool hit = predict(models[k], crp.challenge).bit == crp.response[k];
      correct[k] += hit;
      all = all && hit;
    }
    exact += all;
  }
  RateSummary out;
  const auto total = static_cast<double>(test.size());
  out.per_bit_rate.reserve(bits);
  for (std::size_t c : correct) out.per_bit_rate.push_back(static_cast<double>(c) / total);
  out.mean_rate = std::accumulate(out.per_bit_rate.begin(), out.per_bit_rate.end(), 0.0) /
                  static_cast<double>(bits);
  out.word_exact_rate = static_cast<double>(exact) / total;
  return out;
}

// One cell of a prediction-rate table.
struct AttackReport {
  std::size_t crp_count = 0;
  double test_fraction = 0.0;
  std::vector<double> per_bit_rate;
  double mean_rate = 0.0;
  double word_exact_rate = 0.0;
  FeatureMapKind kind = FeatureMapKind::Parity;
  std::uint64_t seed = 0;

  friend bool operator==(const AttackReport&, const AttackReport&) = default;
};

inline constexpr std::string_view kReportCsvHeader =
    "crps,test_fraction,feature_map,mean_rate,word_exact_rate";

inline std::string csv_row(const AttackReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%g,%s,%.4f,%.4f", r.crp_count, r.test_fraction,
                std::string(to_string(r.kind)).c_str(), r.mean_rate, r.word_exact_rate);
  return buf;
}

// Splits, trains one model per response bit (in parallel over bits) and
// scores all of them on the shared test part.
inline AttackReport attack_multibit(const CrpDataset& ds, FeatureMapKind kind,
                                    double test_fraction, const LrHyperParams& hp,
                                    std::uint64_t seed, std::size_t threads = 1) {
  hp.validate();
  auto [train, test] = split(ds, test_fraction, seed);
  const std::size_t bits = ds.response_width();

  const FeatureMatrix x = FeatureMatrix::encode(kind, train.pairs());
  // Response bits are trained in contiguous groups, one group per worker.
  const std::size_t groups = std::max<std::size_t>(1, std::min(threads, bits));
  std::vector<LrModel> models(bits);
  parallel_for(groups, groups, [&](std::size_t g) {
    const std::size_t first = g * bits / groups;
    const std::size_t count = (g + 1) * bits / groups - first;
    std::vector<std::uint8_t> y(train.size() * count);
    for (std::size_t i = 0; i < train.size(); ++i) {
      for (std::size_t b = 0; b < count; ++b) y[i * count + b] = train[i].response[first + b];
    }
    std::vector<LrFit> fits = train_lr_batch(x, y, count, hp);
    for (std::size_t b = 0; b < count; ++b) {
      models[first + b] =
          LrModel{std::move(fits[b].theta), kind, ds.challenge_width(), std::move(fits[b].meta)};
    }
  });

  RateSummary rates = prediction_rate(models, test);
  return AttackReport{ds.size(),
                      test_fraction,
                      std::move(rates.per_bit_rate),
                      rates.mean_rate,
                      rates.word_exact_rate,
                      kind,
                      seed};
}

}  // namespace apuf
