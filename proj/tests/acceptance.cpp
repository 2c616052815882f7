// End-to-end acceptance run: one PASS/FAIL line per criterion, exit status 1
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "apuf/attack.hpp"
#include "apuf/commands.hpp"
#include "apuf/crp_io.hpp"
#include "apuf/metrics.hpp"
#include "apuf/puf_core.hpp"

namespace fs = std::filesystem;
using namespace apuf;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

std::size_t hardware_threads() { return std::max(1U, std::thread::hardware_concurrency()); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* pattern, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, a);
  return buf;
}

Verdict oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::size_t> widths;
  for (std::size_t n = 1; n <= 12; ++n) widths.push_back(n);
  widths.push_back(64);
  std::vector<std::pair<std::size_t, std::uint64_t>> jobs;
  for (std::size_t n : widths) {
    for (std::uint64_t j = 0; j < 100; ++j) jobs.emplace_back(n, derive_seed(derive_seed(2024, n), j));
  }
  std::vector<cli::OracleOutcome> out(jobs.size());
  parallel_for(jobs.size(), hardware_threads(), [&](std::size_t i) {
    out[i] = cli::oracle_check_chain(jobs[i].first, jobs[i].second, 10000, false);
  });
  std::size_t checks = 0;
  std::size_t bad = 0;
  for (const auto& o : out) {
    checks += o.checks;
    bad += o.mismatch_count;
  }
  // 100 chains per width: sum of 2^n for n = 1..12 plus 10,000 at n = 64.
  const std::size_t expected = 100 * ((std::size_t{1} << 13) - 2) + 100 * 10000;
  const double secs = seconds_since(t0);
  return {bad == 0 && checks == expected && secs < 20.0,
          std::to_string(bad) + " mismatches / " + std::to_string(checks) + " checks, " +
              fmt("%.1f s (limit 20 s)", secs)};
}

Verdict classical_vulnerability() {
  const auto t0 = std::chrono::steady_clock::now();
  SimulationSpec spec;
  spec.stages = 64;
  spec.chains = 1;
  spec.seed = 2;
  const CrpDataset ds = generate_dataset(spec, 4920);
  const AttackReport r =
      attack_multibit(ds, FeatureMapKind::Parity, 0.15, LrHyperParams{}, derive_seed(spec.seed, 3));
  const double secs = seconds_since(t0);
  return {r.mean_rate >= 0.95 && secs < 30.0,
          "rate " + fmt("%.4f (>= 0.95), ", r.mean_rate) + fmt("%.1f s (limit 30 s)", secs)};
}

Verdict grid_resistance() {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg;
  cfg.set("chains", "64");
  cfg.set("features", "raw");
  cfg.set("threads", std::to_string(hardware_threads()));
  const SimulationSpec spec = cli::simulation_spec(cfg);
  const std::vector<std::size_t> counts{750, 1650, 2850, 4920};
  const std::vector<double> fractions{0.15, 0.25, 0.35};
  const CrpDataset full = generate_dataset(spec, 4920, hardware_threads());
  const std::uint64_t root = derive_seed(spec.seed, cli::kSplitStream);
  double lo = 1.0;
  double hi = 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const CrpDataset slice = full.prefix(counts[i]);
    for (std::size_t j = 0; j < fractions.size(); ++j) {
      const AttackReport r = attack_multibit(slice, FeatureMapKind::RawBits, fractions[j], LrHyperParams{},
                                             derive_seed(root, i * fractions.size() + j), hardware_threads());
      lo = std::min(lo, r.mean_rate);
      hi = std::max(hi, r.mean_rate);
      sum += r.mean_rate;
    }
  }
  const double mean = sum / 12.0;
  const double secs = seconds_since(t0);
  return {lo >= 0.40 && hi <= 0.65 && mean >= 0.45 && mean <= 0.60 && secs < 60.0,
          "cells " + fmt("[%.4f, ", lo) + fmt("%.4f] in [0.40, 0.65], ", hi) + "grid mean " +
              fmt("%.4f in [0.45, 0.60], ", mean) + fmt("%.1f s (limit 60 s)", secs)};
}

Verdict gradient_numerics() {
  Rng rng(404);
  const ArbiterChain chain = sample_chain(16, DelayParams{}, 405);
  const CrpDataset ds = generate_dataset(chain, 200, 406);
  const FeatureMatrix x = FeatureMatrix::encode(FeatureMapKind::Parity, ds.pairs());
  std::vector<std::uint8_t> y(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) y[i] = ds[i].response[0];

  // Central differences of the library loss; the loss itself is cross-checked
  // against a direct log-likelihood evaluation at each point.
  auto direct_loss = [&](const std::vector<double>& th, double l2) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double z = 0.0;
      for (std::size_t j = 0; j < x.cols(); ++j) z += x.row(i)[j] * th[j];
      const double p = 1.0 / (1.0 + std::exp(-z));
      total -= y[i] ? std::log(p) : std::log(1.0 - p);
    }
    double pen = 0.0;
    for (std::size_t j = 0; j + 1 < th.size(); ++j) pen += th[j] * th[j];
    return total / static_cast<double>(x.rows()) + l2 / (2.0 * static_cast<double>(x.rows())) * pen;
  };
  double worst = 0.0;
  for (int point = 0; point < 20; ++point) {
    std::vector<double> theta(x.cols());
    for (double& t : theta) t = rng.normal(0.0, 0.5);
    const double l2 = point % 2 == 0 ? 0.0 : 0.3;
    const std::vector<double> g = lr_gradient(x, y, theta, l2);
    std::vector<double> fd(theta.size());
    for (std::size_t j = 0; j < theta.size(); ++j) {
      std::vector<double> up = theta;
      std::vector<double> down = theta;
      up[j] += 1e-5;
      down[j] -= 1e-5;
      fd[j] = (direct_loss(up, l2) - direct_loss(down, l2)) / 2e-5;
    }
    double diff = 0.0;
    double scale = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      diff += (g[j] - fd[j]) * (g[j] - fd[j]);
      scale += fd[j] * fd[j];
    }
    worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(scale), 1e-12));
  }
  const bool sig_ok = sigmoid(0.0) == 0.5 && std::isfinite(sigmoid(1000.0)) &&
                      std::isfinite(sigmoid(-1000.0)) && sigmoid(1000.0) == 1.0 &&
                      sigmoid(-1000.0) >= 0.0 && std::isfinite(softplus(1000.0)) &&
                      std::isfinite(softplus(-1000.0));
  return {worst <= 1e-6 && sig_ok,
          "max relative gradient error " + fmt("%.2e (<= 1e-6), ", worst) + "sigmoid(0)=" +
              fmt("%.17g", sigmoid(0.0)) + fmt(", sigmoid(-1000)=%g", sigmoid(-1000.0)) +
              fmt(", sigmoid(1000)=%g", sigmoid(1000.0))};
}

Verdict metrics_sanity() {
  std::vector<ArbiterChain> pufs;
  for (std::uint64_t i = 0; i < 50; ++i) pufs.push_back(sample_chain(64, DelayParams{}, derive_seed(501, i)));
  const auto challenges = random_challenges(64, 1000, 502);
  const MetricsReport r = measure<ArbiterChain>(pufs, challenges, 10, 502, 503, hardware_threads());

  std::vector<double> rel;
  for (double sigma : {0.01, 0.1, 1.0}) {
    double total = 0.0;
    for (const auto& p : pufs) total += reliability(p.with_noise(sigma), challenges, 10, 503);
    rel.push_back(total / static_cast<double>(pufs.size()));
  }
  const bool ok = r.uniformity >= 0.45 && r.uniformity <= 0.55 && r.uniqueness &&
                  *r.uniqueness >= 0.45 && *r.uniqueness <= 0.55 && r.reliability == 1.0 &&
                  rel[0] >= rel[1] && rel[1] >= rel[2];
  return {ok, "uniformity " + fmt("%.4f, ", r.uniformity) + "uniqueness " +
                  fmt("%.4f, ", r.uniqueness.value_or(-1.0)) + "reliability at zero noise " +
                  fmt("%.4f, ", r.reliability) + "under noise 0.01/0.1/1.0: " + fmt("%.4f / ", rel[0]) +
                  fmt("%.4f / ", rel[1]) + fmt("%.4f", rel[2])};
}

// Published sample rows as printed, title row first.
constexpr const char* kSampleRows =
    "CHALLENGES RESPONSES\n"
    "64h9283c630815977c FF00FF0000FF00FF\n"
    "64h824e3d711516856b FFFF0000FFFFFFF00\n"
    "64h92304516c4bb0240 FF00FFFF0000FF00\n"
    "64h200fbac6d9bb7303 0000FFFFFF00FF00\n"
    "64h6844dcc6a582ac22 000000FFFFFFF0000\n"
    "64h686d3ec2141a7dfb 00FFFFFF00FF0000\n"
    "64h6494978f8293cf35 FF000000FF0000FF\n"
    "64hef911feddf105f4e 00FF00FF000000FF\n"
    "64h7b2869d1d09564d2 0000FFFF00FFFFFFF\n"
    "64hf0d856b216b4c3a3 FF00FFFFFF0000000\n";

Verdict format_fidelity() {
  Rng rng(606);
  std::size_t word_failures = 0;
  for (int t = 0; t < 1000; ++t) {
    const BitWord w = BitWord::uniform(1 + rng.below(128), rng);
    if (parse_hex_word(format_hex_word(w), w.width()) != w) ++word_failures;
  }
  std::size_t dataset_failures = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t cw = 1 + rng.below(70);
    const std::size_t rw = 1 + rng.below(70);
    CrpDataset ds(cw, rw, {{"trial", std::to_string(t)}});
    for (std::uint64_t i = rng.below(16); i > 0; --i) {
      ds.push_back({Challenge(BitWord::uniform(cw, rng)), Response(BitWord::uniform(rw, rng))});
    }
    std::stringstream io;
    write_dataset(ds, io);
    if (read_dataset(io) != ds) ++dataset_failures;
  }

  // A row is well formed when both columns fit 64 bits: at most 16 hex digits
  // after the "64h" prefix.
  std::vector<std::size_t> malformed_lines;
  std::vector<std::size_t> wellformed_lines;
  {
    std::istringstream rows(kSampleRows);
    std::string line;
    std::size_t no = 0;
    while (std::getline(rows, line)) {
      ++no;
      if (no == 1) continue;
      std::istringstream cols(line);
      std::string c;
      std::string r;
      cols >> c >> r;
      const bool ok = c.size() - 3 <= 16 && r.size() <= 16;
      (ok ? wellformed_lines : malformed_lines).push_back(no);
    }
  }
  std::istringstream in(kSampleRows);
  const ImportResult imported = import_rows(in, 64, 64);
  std::vector<std::size_t> rejected;
  bool messages_cite_lines = true;
  for (const auto& rej : imported.rejections) {
    rejected.push_back(rej.line);
    messages_cite_lines &= rej.message.find("line " + std::to_string(rej.line)) != std::string::npos;
  }
  const bool table_ok = rejected == malformed_lines && messages_cite_lines &&
                        imported.dataset.size() == wellformed_lines.size();

  std::string lines;
  for (std::size_t l : rejected) lines += (lines.empty() ? "" : ",") + std::to_string(l);
  return {word_failures == 0 && dataset_failures == 0 && table_ok,
          std::to_string(1000 - word_failures) + "/1000 word and " + std::to_string(1000 - dataset_failures) +
              "/1000 dataset round trips; sample rows: " + std::to_string(imported.rejections.size()) +
              " malformed rows rejected (lines " + lines + "), " + std::to_string(imported.dataset.size()) +
              " of " + std::to_string(wellformed_lines.size()) + " well-formed rows imported"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Verdict cli_determinism() {
  const fs::path dir = ACCEPTANCE_WORKDIR;
  fs::create_directories(dir);
  const std::string bin = PUF_LAB_BIN;
  const fs::path data = dir / "shared.crp";
  struct Case {
    std::string name;
    std::string args;
  };
  const std::vector<Case> cases{
      {"generate", "generate --chains 16 --count 3000 --noise-sigma 0.05 --seed 9"},
      {"attack", "attack " + data.string() + " --features raw --test 0.2 --seed 9"},
      {"sweep", "sweep --chains 8 --counts 300,600 --test-fractions 0.15,0.35 --seed 9"},
      {"metrics", "metrics --n 32 --instances 12 --challenges 300 --repetitions 4 --noise-sigma 0.1 --seed 9"},
  };
  if (std::system((bin + " generate --chains 16 --count 800 --seed 8 -o " + data.string() + " > /dev/null").c_str()) != 0) {
    return {false, "could not create the shared dataset"};
  }
  std::size_t identical = 0;
  std::string failures;
  for (const auto& c : cases) {
    std::string contents[2];
    bool ran = true;
    for (int k = 0; k < 2; ++k) {
      const fs::path out = dir / (c.name + (k == 0 ? ".t1" : ".t4"));
      fs::remove(out);
      const std::string cmd = bin + " " + c.args + " --threads " + (k == 0 ? "1" : "4") + " -o " +
                              out.string() + " > /dev/null 2>&1";
      ran &= std::system(cmd.c_str()) == 0;
      contents[k] = slurp(out);
    }
    if (ran && !contents[0].empty() && contents[0] == contents[1]) {
      ++identical;
    } else {
      failures += " " + c.name;
    }
  }
  return {identical == cases.size(),
          std::to_string(identical) + "/" + std::to_string(cases.size()) +
              " commands byte-identical across --threads 1 and 4" +
              (failures.empty() ? "" : "; differing:" + failures)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"1 oracle equivalence", oracle_equivalence},
      {"2 classical chain broken by parity LR", classical_vulnerability},
      {"3 proposed design resists raw LR (grid)", grid_resistance},
      {"4 sigmoid and gradient numerics", gradient_numerics},
      {"5 metrics sanity", metrics_sanity},
      {"6 format fidelity", format_fidelity},
      {"7 CLI determinism", cli_determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += v.pass ? 0 : 1;
    std::printf("%s  criterion %s: %s\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
