#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "alignscan/model.hpp"

namespace alignscan {

enum class BenchMode {
  Dense,      // schedule ignored, every layer sees all tokens
  Aligned,    // schedule applied, position-map kernel
  Condensed,  // schedule applied, survivors scanned as adjacent
};

std::string_view to_string(BenchMode m);
BenchMode parse_bench_mode(std::string_view name);

inline constexpr int kMinRepeats = 5;
inline constexpr int kMinWarmup = 2;

struct TimingStats {
  std::vector<double> samples_ms;
  double median_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  /// False when the median is within 1000 ticks of the clock.
  bool timer_resolution_ok = true;
  /// Scan counters matched across every timed repeat.
  bool work_deterministic = true;
  OpCounters scan_work;  // one forward pass
};

/// Times model_forward (single thread unless threads > 1) with `warmup`
/// untimed runs followed by `repeats` timed runs on a monotonic clock.
TimingStats time_forward(const ModelConfig& cfg, BenchMode mode, int repeats,
                         int warmup, unsigned threads = 1);

struct BenchResult {
  std::string config_digest;
  BenchMode mode = BenchMode::Dense;
  int repeats = 0;
  int warmup = 0;
  unsigned threads = 1;
  double median_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  double tokens_per_sec = 0.0;
  double baseline_median_ms = 0.0;
  double speedup = 0.0;  // baseline median / median
  bool timer_resolution_ok = true;
  bool work_deterministic = true;

  friend bool operator==(const BenchResult&, const BenchResult&) = default;
};

/// Times `mode` and a dense baseline in the same session.
BenchResult run_benchmark(const ModelConfig& cfg, BenchMode mode,
                          int repeats = kMinRepeats, int warmup = kMinWarmup,
                          unsigned threads = 1);

double median(std::vector<double> values);

}  // namespace alignscan
