#pragma once

// Command implementations behind the puf-lab executable. Each command takes
// a resolved RunConfig and two output streams and returns the process exit
// code; run_guarded() maps library exceptions onto the exit-code contract:
//
//   0 success, 1 validation/usage error, 2 data error, 3 oracle mismatch.
//
// Every file a command writes depends only on the config (never on the
// worker-thread count or the output path), so reruns are byte-identical.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "apuf/attack.hpp"
#include "apuf/config.hpp"
#include "apuf/crp_io.hpp"
#include "apuf/error.hpp"
#include "apuf/metrics.hpp"
#include "apuf/parallel.hpp"
#include "apuf/puf_core.hpp"

namespace apuf::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kMismatch = 3 };

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

// Sub-streams of the master seed used by the commands (0-2 belong to
// SimulationSpec).
enum SeedStream : std::uint64_t {
  kSplitStream = 3,
  kInstanceStream = 4,
  kMetricChallengeStream = 5,
  kMetricNoiseStream = 6,
  kOracleStream = 7,
};

inline constexpr std::uint64_t kDefaultSeed = 1;

inline std::uint64_t master_seed(const RunConfig& cfg) { return cfg.seed.value_or(kDefaultSeed); }
inline std::size_t worker_threads(const RunConfig& cfg) { return cfg.threads.value_or(1); }

// chains defaults to 1 (classical chain); for chains > 1 the stage count
// defaults to the chain count.
inline SimulationSpec simulation_spec(const RunConfig& cfg) {
  SimulationSpec spec;
  spec.chains = cfg.chains.value_or(1);
  spec.stages = cfg.stages.value_or(spec.chains > 1 ? spec.chains : 64);
  spec.delays.mean = cfg.delay_mean.value_or(DelayParams{}.mean);
  spec.delays.sigma = cfg.delay_sigma.value_or(DelayParams{}.sigma);
  spec.noise_sigma = cfg.noise_sigma.value_or(0.0);
  spec.seed = master_seed(cfg);
  spec.validate();
  return spec;
}

inline LrHyperParams hyper_params(const RunConfig& cfg) {
  LrHyperParams hp;
  hp.learning_rate = cfg.learning_rate.value_or(hp.learning_rate);
  hp.epochs = cfg.epochs.value_or(hp.epochs);
  hp.l2 = cfg.l2.value_or(hp.l2);
  hp.tol = cfg.tol.value_or(hp.tol);
  hp.validate();
  return hp;
}

inline FeatureMapKind feature_map(const RunConfig& cfg) {
  return cfg.features.value_or(FeatureMapKind::Parity);
}

namespace detail {

inline std::string real(double v) { return apuf::detail::format_real(v); }

using Settings = std::vector<std::pair<std::string, std::string>>;

inline std::string echo(const Settings& settings) {
  std::string out;
  for (const auto& [k, v] : settings) out += "# " + k + " = " + v + "\n";
  return out;
}

inline Settings simulation_settings(const SimulationSpec& spec) {
  return {{"stages", std::to_string(spec.stages)},
          {"chains", std::to_string(spec.chains)},
          {"delay_mean", real(spec.delays.mean)},
          {"delay_sigma", real(spec.delays.sigma)},
          {"noise_sigma", real(spec.noise_sigma)},
          {"seed", std::to_string(spec.seed)}};
}

inline Settings training_settings(const RunConfig& cfg, const LrHyperParams& hp) {
  return {{"features", std::string(to_string(feature_map(cfg)))},
          {"learning_rate", real(hp.learning_rate)},
          {"epochs", std::to_string(hp.epochs)},
          {"l2", real(hp.l2)},
          {"tol", real(hp.tol)}};
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path + " for writing");
  f << content;
  if (!f) throw Error("write to " + path + " failed");
}

inline std::string percent(double rate) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * rate);
  return buf;
}

}  // namespace detail

inline int cmd_generate(const RunConfig& cfg, Streams io) {
  if (!cfg.count) throw InvalidParameter("generate: --count is required");
  const SimulationSpec spec = simulation_spec(cfg);
  const CrpDataset ds = generate_dataset(spec, *cfg.count, worker_threads(cfg));

  std::ostream* note = &io.out;
  if (cfg.output) {
    write_dataset(ds, *cfg.output);
  } else {
    write_dataset(ds, io.out);
    note = &io.err;
  }
  *note << "generated " << ds.size() << " CRPs: kind=" << (spec.multibit() ? "multibit" : "apuf")
        << " stages=" << spec.stages << " chains=" << spec.chains << " seed=" << spec.seed
        << " challenge_bits=" << ds.challenge_width() << " response_bits=" << ds.response_width()
        << '\n';
  return kOk;
}

struct DatasetSource {
  std::string path;
  // Loose "<challenge> <response>" rows with Verilog prefixes; needs widths.
  bool import_rows = false;
  std::optional<std::size_t> challenge_bits;
  std::optional<std::size_t> response_bits;
};

inline CrpDataset load_dataset(const DatasetSource& src, std::ostream& err) {
  if (!src.import_rows) return read_dataset(src.path);
  if (!src.challenge_bits || !src.response_bits) {
    throw InvalidParameter("import mode needs --challenge-bits and --response-bits");
  }
  std::ifstream in(src.path, std::ios::binary);
  if (!in) throw Error("cannot open " + src.path);
  ImportResult imported = import_rows(in, *src.challenge_bits, *src.response_bits);
  for (const auto& r : imported.rejections) err << "rejected " << r.message << '\n';
  err << "imported " << imported.dataset.size() << " rows, rejected " << imported.rejections.size()
      << '\n';
  return std::move(imported.dataset);
}

inline std::string report_table(const AttackReport& r) {
  double lo = 1.0;
  double hi = 0.0;
  for (double v : r.per_bit_rate) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::ostringstream os;
  os << "crps=" << r.crp_count << " test_fraction=" << detail::real(r.test_fraction)
     << " features=" << to_string(r.kind) << " response_bits=" << r.per_bit_rate.size() << '\n'
     << "  prediction rate (mean over bits): " << detail::percent(r.mean_rate) << " %\n"
     << "  per-bit min / max:                " << detail::percent(lo) << " / "
     << detail::percent(hi) << " %\n"
     << "  whole-word exact match:           " << detail::percent(r.word_exact_rate) << " %\n";
  return os.str();
}

inline int cmd_attack(const RunConfig& cfg, const DatasetSource& src, Streams io) {
  const double fraction = cfg.test_fraction.value_or(0.25);
  const LrHyperParams hp = hyper_params(cfg);
  const CrpDataset ds = load_dataset(src, io.err);
  const std::uint64_t seed = derive_seed(master_seed(cfg), kSplitStream);
  const AttackReport report =
      attack_multibit(ds, feature_map(cfg), fraction, hp, seed, worker_threads(cfg));

  detail::Settings settings = detail::training_settings(cfg, hp);
  settings.emplace_back("test_fraction", detail::real(fraction));
  settings.emplace_back("seed", std::to_string(master_seed(cfg)));
  const std::string csv = detail::echo(settings) + std::string(kReportCsvHeader) + "\n" +
                          csv_row(report) + "\n";
  io.out << report_table(report);
  if (cfg.output) {
    detail::write_file(*cfg.output, csv);
  } else {
    io.out << csv;
  }
  return kOk;
}

// Grid of (count, fraction) cells over prefixes of one dataset.
inline std::string sweep_table(const std::vector<std::size_t>& counts,
                               const std::vector<double>& fractions,
                               const std::vector<AttackReport>& cells) {
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-10s", "CRPs");
  os << buf;
  for (double f : fractions) {
    std::snprintf(buf, sizeof buf, "%10g", f);
    os << buf;
  }
  os << "\n" << std::string(10, ' ') << "  prediction rate % (mean over response bits)\n";
  for (std::size_t i = 0; i < counts.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%-10zu", counts[i]);
    os << buf;
    for (std::size_t j = 0; j < fractions.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%10s",
                    detail::percent(cells[i * fractions.size() + j].mean_rate).c_str());
      os << buf;
    }
    os << '\n';
  }
  double sum = 0.0;
  for (const auto& c : cells) sum += c.mean_rate;
  os << "grid mean: " << detail::percent(sum / static_cast<double>(cells.size())) << " %\n";
  return os.str();
}

inline int cmd_sweep(const RunConfig& cfg, Streams io) {
  std::vector<std::size_t> counts = cfg.counts.value_or(
      cfg.count ? std::vector<std::size_t>{*cfg.count} : std::vector<std::size_t>{750, 1650, 2850, 4920});
  std::vector<double> fractions = cfg.test_fractions.value_or(
      cfg.test_fraction ? std::vector<double>{*cfg.test_fraction}
                        : std::vector<double>{0.15, 0.25, 0.35});
  for (std::size_t c : counts) {
    if (c < 2) throw InvalidParameter("sweep: every CRP count must be >= 2");
  }
  const SimulationSpec spec = simulation_spec(cfg);
  const LrHyperParams hp = hyper_params(cfg);
  const FeatureMapKind kind = feature_map(cfg);
  const std::size_t threads = worker_threads(cfg);

  const std::size_t largest = *std::max_element(counts.begin(), counts.end());
  const CrpDataset full = generate_dataset(spec, largest, threads);
  const std::uint64_t split_root = derive_seed(spec.seed, kSplitStream);

  std::vector<AttackReport> cells;
  cells.reserve(counts.size() * fractions.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const CrpDataset slice = full.prefix(counts[i]);
    for (std::size_t j = 0; j < fractions.size(); ++j) {
      const std::uint64_t cell_seed = derive_seed(split_root, i * fractions.size() + j);
      cells.push_back(attack_multibit(slice, kind, fractions[j], hp, cell_seed, threads));
    }
  }

  detail::Settings settings = detail::simulation_settings(spec);
  for (auto& s : detail::training_settings(cfg, hp)) settings.push_back(std::move(s));
  std::string count_list;
  for (std::size_t c : counts) count_list += (count_list.empty() ? "" : ",") + std::to_string(c);
  std::string fraction_list;
  for (double f : fractions) fraction_list += (fraction_list.empty() ? "" : ",") + detail::real(f);
  settings.emplace_back("counts", count_list);
  settings.emplace_back("test_fractions", fraction_list);

  std::string csv = detail::echo(settings) + std::string(kReportCsvHeader) + "\n";
  for (const auto& c : cells) csv += csv_row(c) + "\n";

  io.out << sweep_table(counts, fractions, cells);
  if (cfg.output) {
    detail::write_file(*cfg.output, csv);
  } else {
    io.out << csv;
  }
  return kOk;
}

inline int cmd_metrics(const RunConfig& cfg, Streams io) {
  const std::size_t k = cfg.instances.value_or(50);
  if (k < 2) throw InvalidParameter("metrics: uniqueness needs --instances >= 2");
  const std::size_t t = cfg.challenges.value_or(1000);
  const std::size_t reps = cfg.repetitions.value_or(10);
  const SimulationSpec base = simulation_spec(cfg);
  if (base.noise_sigma > 0.0 && reps < 2) {
    throw InvalidParameter("metrics: reliability under noise needs --repetitions >= 2");
  }
  const std::size_t threads = worker_threads(cfg);
  const std::uint64_t challenge_seed = derive_seed(base.seed, kMetricChallengeStream);
  const std::uint64_t noise_seed = derive_seed(base.seed, kMetricNoiseStream);
  const auto challenges = random_challenges(base.stages, t, challenge_seed);

  auto instance_spec = [&](std::size_t i) {
    SimulationSpec s = base;
    s.seed = derive_seed(derive_seed(base.seed, kInstanceStream), i);
    return s;
  };

  MetricsReport report;
  if (base.multibit()) {
    std::vector<MultiBitPuf> pufs;
    for (std::size_t i = 0; i < k; ++i) pufs.push_back(std::get<MultiBitPuf>(build_puf(instance_spec(i))));
    report = measure<MultiBitPuf>(pufs, challenges, reps, challenge_seed, noise_seed, threads);
  } else {
    std::vector<ArbiterChain> pufs;
    for (std::size_t i = 0; i < k; ++i) pufs.push_back(std::get<ArbiterChain>(build_puf(instance_spec(i))));
    report = measure<ArbiterChain>(pufs, challenges, reps, challenge_seed, noise_seed, threads);
  }

  detail::Settings settings = detail::simulation_settings(base);
  settings.emplace_back("instances", std::to_string(k));
  settings.emplace_back("challenges", std::to_string(t));
  settings.emplace_back("repetitions", std::to_string(reps));
  const std::string csv = detail::echo(settings) + to_csv(report);

  io.out << to_table(report);
  if (cfg.output) {
    detail::write_file(*cfg.output, csv);
  } else {
    io.out << csv;
  }
  return kOk;
}

struct OracleMismatch {
  std::size_t stages;
  std::uint64_t chain_seed;
  std::string challenge_hex;
  bool brute;
  bool linear;
};

struct OracleOutcome {
  std::size_t checks = 0;
  std::size_t mismatch_count = 0;
  std::vector<OracleMismatch> mismatches;  // first few only
};

// Compares the propagation simulator with its additive model on one chain.
// Widths up to 12 are checked exhaustively, wider chains on `random_count`
// uniform challenges. `corrupt` negates the model weights (fault injection).
inline OracleOutcome oracle_check_chain(std::size_t n, std::uint64_t chain_seed,
                                        std::size_t random_count, bool corrupt) {
  const ArbiterChain chain = sample_chain(n, DelayParams{}, chain_seed);
  LinearModel model = to_linear(chain);
  if (corrupt) {
    for (double& w : model.w) w = -w;
  }
  OracleOutcome out;
  auto check = [&](const BitWord& c) {
    ++out.checks;
    const bool brute = eval_brute(chain, c);
    const bool linear = eval_linear(model, c);
    if (brute == linear) return;
    ++out.mismatch_count;
    if (out.mismatches.size() < 16) {
      out.mismatches.push_back({n, chain_seed, format_hex_word(c), brute, linear});
    }
  };
  if (n <= 12) {
    for (std::uint64_t v = 0; v < (std::uint64_t{1} << n); ++v) {
      BitWord c(n);
      for (std::size_t i = 0; i < n; ++i) c.set(n - 1 - i, (v >> i) & 1U);
      check(c);
    }
  } else {
    for (std::size_t i = 0; i < random_count; ++i) {
      Rng rng(derive_seed(chain_seed, i));
      check(BitWord::uniform(n, rng));
    }
  }
  return out;
}

// Without --n: every width 1..12 exhaustively plus width 64 on random
// challenges; with --n: that width only. `instances` chains per width.
inline int cmd_oracle_check(const RunConfig& cfg, bool inject_fault, Streams io) {
  std::vector<std::size_t> widths;
  if (cfg.stages) {
    widths.push_back(*cfg.stages);
  } else {
    for (std::size_t n = 1; n <= 12; ++n) widths.push_back(n);
    widths.push_back(64);
  }
  const std::size_t per_width = cfg.instances.value_or(100);
  const std::size_t random_count = cfg.challenges.value_or(10000);
  const std::uint64_t root = derive_seed(master_seed(cfg), kOracleStream);

  struct Job {
    std::size_t n;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t n : widths) {
    for (std::size_t j = 0; j < per_width; ++j) jobs.push_back({n, derive_seed(derive_seed(root, n), j)});
  }
  std::vector<OracleOutcome> outcomes(jobs.size());
  parallel_for(jobs.size(), worker_threads(cfg), [&](std::size_t i) {
    outcomes[i] = oracle_check_chain(jobs[i].n, jobs[i].seed, random_count, inject_fault && i == 0);
  });

  std::size_t checks = 0;
  std::size_t failed = 0;
  for (const auto& o : outcomes) {
    checks += o.checks;
    failed += o.mismatch_count;
    for (const auto& m : o.mismatches) {
      io.out << "mismatch: stages=" << m.stages << " chain_seed=" << m.chain_seed
             << " challenge=" << m.challenge_hex << " brute=" << m.brute << " linear=" << m.linear
             << '\n';
    }
  }
  io.out << failed << " mismatches / " << checks << " checks\n";
  return failed == 0 ? kOk : kMismatch;
}

// Runs a command, translating library exceptions into exit codes.
inline int run_guarded(const std::function<int()>& command, std::ostream& err) {
  try {
    return command();
  } catch (const InvalidParameter& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DimensionError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const ParseError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace apuf::cli
