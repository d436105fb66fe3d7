#include "alignscan/bench.hpp"

#include <algorithm>
#include <chrono>
#include <string>

#include "alignscan/error.hpp"
#include "alignscan/serialize.hpp"

namespace alignscan {

std::string_view to_string(BenchMode m) {
  switch (m) {
    case BenchMode::Dense: return "dense";
    case BenchMode::Aligned: return "aligned";
    case BenchMode::Condensed: return "condensed";
  }
  return "unknown";
}

BenchMode parse_bench_mode(std::string_view name) {
  for (auto m : {BenchMode::Dense, BenchMode::Aligned, BenchMode::Condensed}) {
    if (name == to_string(m)) return m;
  }
  throw ConfigError("unknown bench mode '" + std::string(name) +
                    "' (expected dense, aligned or condensed)");
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid]
                                 : 0.5 * (values[mid - 1] + values[mid]);
}

TimingStats time_forward(const ModelConfig& cfg, BenchMode mode, int repeats,
                         int warmup, unsigned threads) {
  if (repeats < kMinRepeats || warmup < kMinWarmup) {
    throw ConfigError("benchmark needs repeats >= " +
                      std::to_string(kMinRepeats) + " and warmup >= " +
                      std::to_string(kMinWarmup));
  }
  ModelConfig run_cfg = cfg;
  if (mode == BenchMode::Dense) run_cfg.prune.prune_after_layers.clear();
  run_cfg.validate();
  const std::vector<BlockWeights> weights = init_weights(run_cfg);
  const TokenTensor x = make_input(run_cfg, run_cfg.seed + 1);

  ForwardOptions opts;
  opts.scan = mode == BenchMode::Condensed ? PrunedScan::Condensed
                                           : PrunedScan::Aligned;
  opts.threads = threads;

  for (int i = 0; i < warmup; ++i) model_forward(x, run_cfg, weights, opts);

  using Clock = std::chrono::steady_clock;
  TimingStats stats;
  std::vector<BlockWork> work;
  opts.work = &work;
  for (int i = 0; i < repeats; ++i) {
    work.clear();
    const auto start = Clock::now();
    model_forward(x, run_cfg, weights, opts);
    const auto stop = Clock::now();
    stats.samples_ms.push_back(
        std::chrono::duration<double, std::milli>(stop - start).count());
    OpCounters scan;
    for (const auto& w : work) scan += w.scan;
    if (i == 0) {
      stats.scan_work = scan;
    } else if (!(scan == stats.scan_work)) {
      stats.work_deterministic = false;
    }
  }
  stats.median_ms = median(stats.samples_ms);
  stats.min_ms = *std::min_element(stats.samples_ms.begin(), stats.samples_ms.end());
  stats.max_ms = *std::max_element(stats.samples_ms.begin(), stats.samples_ms.end());
  const double tick_ms = 1e3 * static_cast<double>(Clock::period::num) /
                         static_cast<double>(Clock::period::den);
  stats.timer_resolution_ok = stats.median_ms >= 1000.0 * tick_ms;
  return stats;
}

BenchResult run_benchmark(const ModelConfig& cfg, BenchMode mode, int repeats,
                          int warmup, unsigned threads) {
  const TimingStats baseline =
      time_forward(cfg, BenchMode::Dense, repeats, warmup, threads);
  const TimingStats target = time_forward(cfg, mode, repeats, warmup, threads);

  BenchResult r;
  r.config_digest = config_digest(cfg);
  r.mode = mode;
  r.repeats = repeats;
  r.warmup = warmup;
  r.threads = threads;
  r.median_ms = target.median_ms;
  r.min_ms = target.min_ms;
  r.max_ms = target.max_ms;
  r.baseline_median_ms = baseline.median_ms;
  r.speedup = target.median_ms > 0.0 ? baseline.median_ms / target.median_ms : 0.0;
  r.tokens_per_sec = target.median_ms > 0.0
                         ? static_cast<double>(cfg.batch * cfg.grid.size()) /
                               (target.median_ms * 1e-3)
                         : 0.0;
  r.timer_resolution_ok =
      target.timer_resolution_ok && baseline.timer_resolution_ok;
  r.work_deterministic = target.work_deterministic && baseline.work_deterministic;
  return r;
}

}  // namespace alignscan
